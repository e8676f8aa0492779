// k2t command-line tool: generation, evaluation, experiment sweeps and a
// small n-gram provider for the logprobs protocol.
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "k2t/decoding.hpp"
#include "k2t/error.hpp"
#include "k2t/experiment.hpp"
#include "k2t/metrics.hpp"
#include "k2t/ngram.hpp"
#include "k2t/remote.hpp"
#include "k2t/semantic_space.hpp"
#include "k2t/toy_world.hpp"

using namespace k2t;

namespace {

struct ModelOptions {
  std::string lm;
  std::string corpus;
  int order = 2;
  double smoothing = 0.1;
  std::string remote;
  std::string remote_cmd;
};

void add_model_options(CLI::App* cmd, ModelOptions& m, bool with_remote) {
  auto* lm = cmd->add_option("--lm", m.lm, "n-gram model file");
  auto* corpus = cmd->add_option("--corpus", m.corpus, "train an n-gram model on this corpus");
  lm->excludes(corpus);
  cmd->add_option("--order", m.order, "n-gram order")->check(CLI::PositiveNumber);
  cmd->add_option("--smoothing", m.smoothing, "add-k constant")->check(CLI::PositiveNumber);
  if (with_remote) {
    auto* r = cmd->add_option("--remote", m.remote, "logprobs provider at HOST:PORT");
    auto* rc = cmd->add_option("--remote-cmd", m.remote_cmd, "spawn a logprobs provider");
    r->excludes(rc)->excludes(lm)->excludes(corpus);
    rc->excludes(lm)->excludes(corpus);
  }
}

NGramModel train_from(const std::string& corpus_path, int order, double k) {
  const auto corpus = read_corpus_file(corpus_path);
  const auto vocab = make_word_vocabulary(corpus);
  std::vector<std::vector<TokenId>> ids;
  for (const auto& s : corpus) ids.push_back(encode_sentence(vocab, s));
  return NGramModel::train(ids, vocab, order, k);
}

std::unique_ptr<LanguageModel> open_model(const ModelOptions& m) {
  if (!m.remote.empty()) return std::make_unique<RemoteModel>(connect_tcp(m.remote));
  if (!m.remote_cmd.empty()) return std::make_unique<RemoteModel>(spawn_child_transport(m.remote_cmd));
  if (!m.lm.empty()) return std::make_unique<NGramModel>(NGramModel::load_file(m.lm));
  if (!m.corpus.empty()) return std::make_unique<NGramModel>(train_from(m.corpus, m.order, m.smoothing));
  throw ContractError("no language model given (--lm, --corpus, --remote or --remote-cmd)");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  std::vector<std::string> words;
  for (auto& w : out) {
    auto k = normalize_key(w);
    if (!k.empty()) words.push_back(std::move(k));
  }
  return words;
}

std::vector<TokenId> prompt_ids(const Vocabulary& vocab, const std::string& prompt) {
  std::vector<TokenId> ids = {vocab.bos()};
  auto p = vocab.encode(prompt);
  ids.insert(ids.end(), p.begin(), p.end());
  return ids;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << text;
}

void write_trace(const std::string& path, const GenerationResult& g, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  for (const auto& s : g.per_step_trace) {
    nlohmann::json j = {{"step", s.step},           {"token_id", s.token},  {"token", vocab.token(s.token)},
                        {"shift", s.shift},         {"forced", s.forced}};
    // JSON has no infinity; a forced step reports lambda as null.
    if (std::isfinite(s.lambda)) j["lambda"] = s.lambda;
    else j["lambda"] = nullptr;
    out << j.dump() << '\n';
  }
}

struct GenerateOptions {
  ModelOptions model;
  std::string embeddings;
  std::string keywords;
  std::string prompt;
  std::string algorithm = "ns";
  std::string strategy = "closest";
  double p = 0.9;
  int beams = 4;
  double lambda0 = 5.0;
  double c = 100.0;
  int max_len = 90;
  bool no_anneal = false;
  bool exact = false;
  std::uint64_t seed = 0;
  std::string trace;
  std::string out;
};

int run_generate(const GenerateOptions& o) {
  auto model = open_model(o.model);
  const auto table = load_embeddings_file(o.embeddings);
  const auto& vocab = model->vocabulary();
  DecodeConfig cfg;
  cfg.algorithm = parse_algorithm(o.algorithm);
  cfg.strategy = parse_strategy(o.strategy);
  cfg.nucleus_p = o.p;
  cfg.beam_width = o.beams;
  cfg.lambda0 = o.lambda0;
  cfg.growth_c = o.c;
  cfg.max_len = o.max_len;
  cfg.annealing_enabled = !o.no_anneal;
  cfg.similarity = o.exact ? SimilarityMode::exact : SimilarityMode::semantic;
  cfg.seed = o.seed;
  cfg.record_trace = !o.trace.empty();
  const auto words = split_csv(o.keywords);
  auto guides = make_guide_words(words, vocab, table);
  const auto g = decode(cfg, prompt_ids(vocab, o.prompt), std::move(guides), *model, table);

  const std::string text = o.prompt.empty() ? g.text : o.prompt + " " + g.text;
  std::cout << text << '\n';
  std::string report = fmt::format("satisfied {}/{}:", g.satisfied.size(), words.size());
  for (const auto& s : g.satisfied) report += fmt::format(" {}@{}", s.word, s.step);
  std::cout << report << '\n';
  if (!o.out.empty()) write_text(o.out, text + "\n");
  if (!o.trace.empty()) write_trace(o.trace, g, vocab);
  return 0;
}

struct EvalOptions {
  ModelOptions model;
  std::string text;
  std::string in;
  std::string keywords;
};

int run_eval(const EvalOptions& o) {
  auto model = open_model(o.model);
  std::vector<std::string> texts;
  if (!o.in.empty()) {
    std::ifstream in(o.in);
    if (!in) throw LoadError("cannot open '" + o.in + "'");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) texts.push_back(line);
  } else {
    texts.push_back(o.text);
  }
  if (texts.empty()) throw ContractError("nothing to evaluate");
  const auto kw = split_csv(o.keywords);
  const auto& vocab = model->vocabulary();
  double ppl = 0.0, rep = 0.0;
  std::vector<std::vector<std::string>> sets;
  for (const auto& t : texts) {
    auto ids = vocab.encode(t);
    ids.push_back(vocab.eos());
    const std::vector<TokenId> prefix = {vocab.bos()};
    ppl += perplexity(ids, *model, prefix);
    std::vector<std::string> words;
    for (auto& tok : tokenize(t))
      if (is_word_token(tok)) words.push_back(tok);
    rep += repetition_4gram(words);
    sets.push_back(kw);
  }
  const double n = static_cast<double>(texts.size());
  std::cout << fmt::format("ppl {:.6f}\nrepetition {:.6f}\nsuccess_rate {:.6f}\n", ppl / n, 100.0 * rep / n,
                           kw.empty() ? 0.0 : success_rate(texts, sets));
  return 0;
}

int run_experiment_cmd(const std::string& config, const std::string& out_override) {
  auto spec = load_experiment_spec(config);
  if (!out_override.empty()) spec.output = out_override;
  const auto res = load_resources(spec);
  const auto cells = run_experiment(spec, res.view());
  const auto csv = format_csv(cells);
  if (spec.output.empty()) std::cout << csv;
  else write_text(spec.output, csv);
  int failed = 0;
  for (const auto& c : cells) failed += c.failures;
  if (failed) spdlog::warn("{} cell(s) failed", failed);
  return 0;
}

int run_serve_check(const ModelOptions& m) {
  if (m.remote.empty() && m.remote_cmd.empty()) throw ContractError("serve-check needs --remote or --remote-cmd");
  auto model = open_model(m);
  const auto& vocab = model->vocabulary();
  const std::vector<TokenId> ctx = {vocab.bos()};
  const auto scores = model->logprobs(ctx);
  std::cout << fmt::format("handshake ok: |V|={} bos={} eos={}\n", vocab.size(), vocab.bos(), vocab.eos());
  std::cout << fmt::format("round-trip ok: logsumexp={:.3e}\n", logsumexp(scores.values));
  return 0;
}

int run_serve(const ModelOptions& m, bool stdio, int port) {
  auto model = open_model(m);
  if (stdio || port <= 0) {
    FdTransport t(0, 1);
    ProtocolServer(*model).serve(t);
    return 0;
  }
  serve_tcp(*model, port, 0, [](int p) { spdlog::info("listening on 127.0.0.1:{}", p); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_logger_st("k2t"));
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("K2T_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Keyword-guided text generation"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "generate one text containing the keywords");
  add_model_options(g, gen.model, true);
  g->add_option("--embeddings", gen.embeddings, "word vectors")->required();
  g->add_option("--keywords", gen.keywords, "comma-separated guide words")->required();
  g->add_option("--prompt", gen.prompt);
  g->add_option("--algorithm", gen.algorithm)->check(CLI::IsMember({"ns", "bs", "bswc", "bswcns"}));
  g->add_option("--strategy", gen.strategy)->check(CLI::IsMember({"order", "closest", "all", "random"}));
  g->add_option("--p", gen.p)->check(CLI::Range(0.0, 1.0));
  g->add_option("--beams", gen.beams)->check(CLI::PositiveNumber);
  g->add_option("--lambda0", gen.lambda0)->check(CLI::NonNegativeNumber);
  g->add_option("--c", gen.c);
  g->add_option("--max-len", gen.max_len)->check(CLI::PositiveNumber);
  g->add_flag("--no-anneal", gen.no_anneal);
  g->add_flag("--exact-match", gen.exact, "reward only the guide words' own tokens");
  g->add_option("--seed", gen.seed);
  g->add_option("--trace", gen.trace, "per-step JSON-lines trace");
  g->add_option("--out", gen.out);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "perplexity, repetition and success rate of texts");
  add_model_options(e, ev.model, true);
  auto* ev_text = e->add_option("--text", ev.text);
  auto* ev_in = e->add_option("--in", ev.in, "one text per line");
  ev_text->excludes(ev_in);
  e->add_option("--keywords", ev.keywords);

  std::string config, exp_out;
  auto* x = app.add_subcommand("experiment", "run a grid sweep and write CSV");
  x->add_option("config", config, "JSON experiment spec")->required();
  x->add_option("--out", exp_out);

  ModelOptions train;
  std::string train_out;
  auto* t = app.add_subcommand("train-lm", "train an n-gram model");
  t->add_option("--corpus", train.corpus)->required();
  t->add_option("--order", train.order)->check(CLI::PositiveNumber);
  t->add_option("--smoothing", train.smoothing)->check(CLI::PositiveNumber);
  t->add_option("--out", train_out)->required();

  ModelOptions check;
  auto* sc = app.add_subcommand("serve-check", "handshake and one logprobs round-trip");
  sc->add_option("--remote", check.remote);
  sc->add_option("--remote-cmd", check.remote_cmd);

  ModelOptions serve;
  bool stdio = false;
  int port = 0;
  auto* sv = app.add_subcommand("serve", "serve an n-gram model over the logprobs protocol");
  add_model_options(sv, serve, false);
  auto* sv_stdio = sv->add_flag("--stdio", stdio);
  sv->add_option("--tcp", port)->excludes(sv_stdio);

  std::string toy_words, toy_stop, toy_dir;
  ToyWorldOptions toy;
  auto* mt = app.add_subcommand("make-toy", "write the synthetic toy corpus, embeddings and models");
  mt->add_option("--words", toy_words)->required();
  mt->add_option("--stopwords", toy_stop)->required();
  mt->add_option("--out", toy_dir)->required();
  mt->add_option("--seed", toy.seed);
  mt->add_option("--smoothing", toy.smoothing_k)->check(CLI::PositiveNumber);
  mt->add_option("--eval-smoothing", toy.eval_smoothing_k)->check(CLI::PositiveNumber);
  mt->add_option("--stickiness", toy.topic_stickiness)->check(CLI::Range(0.0, 1.0));
  mt->add_option("--function-rate", toy.function_word_rate)->check(CLI::Range(0.0, 1.0));
  mt->add_option("--sentences", toy.train_sentences);
  mt->add_option("--eval-sentences", toy.eval_sentences);
  mt->add_option("--topic-weight", toy.topic_weight);
  mt->add_option("--topics", toy.topics)->check(CLI::PositiveNumber);

  std::string kw_words, kw_stop;
  int n_sets = 50, set_size = 5;
  std::uint64_t kw_seed = 0;
  auto* kw = app.add_subcommand("keywords", "print keyword sets, one per line");
  kw->add_option("--words", kw_words)->required();
  kw->add_option("--stopwords", kw_stop);
  kw->add_option("--n-sets", n_sets);
  kw->add_option("--set-size", set_size);
  kw->add_option("--seed", kw_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return run_generate(gen);
    if (*e) return run_eval(ev);
    if (*x) return run_experiment_cmd(config, exp_out);
    if (*t) {
      train_from(train.corpus, train.order, train.smoothing).save_file(train_out);
      return 0;
    }
    if (*sc) return run_serve_check(check);
    if (*sv) return run_serve(serve, stdio, port);
    if (*mt) {
      const auto world = build_toy_world(read_word_list(toy_words), read_word_set(toy_stop), toy);
      write_toy_world(world, toy_dir, toy);
      return 0;
    }
    if (*kw) {
      std::unordered_set<std::string> stop;
      if (!kw_stop.empty()) stop = read_word_set(kw_stop);
      for (const auto& set : build_keyword_sets(read_word_list(kw_words), stop, n_sets, set_size, kw_seed)) {
        std::string line;
        for (const auto& w : set) line += (line.empty() ? "" : ",") + w;
        std::cout << line << '\n';
      }
      return 0;
    }
  } catch (const ContractError& err) {
    std::cerr << "k2t: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "k2t: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
