#include "k2t/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "k2t/error.hpp"
#include "k2t/rng.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

using nlohmann::json;

std::vector<std::string> read_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open word list '" + path + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto key = normalize_key(line);
    if (!key.empty()) words.push_back(std::move(key));
  }
  return words;
}

std::unordered_set<std::string> read_word_set(const std::string& path) {
  auto words = read_word_list(path);
  return {words.begin(), words.end()};
}

std::vector<std::vector<std::string>> build_keyword_sets(std::span<const std::string> word_list,
                                                         const std::unordered_set<std::string>& stopwords,
                                                         int n_sets, int set_size, std::uint64_t seed) {
  if (word_list.size() < 1000) throw ContractError("keyword construction needs a list of at least 1000 words");
  if (n_sets < 0 || set_size < 1) throw ContractError("invalid keyword set shape");
  std::vector<std::string> pool;
  for (std::size_t i = 500; i < word_list.size(); ++i)
    if (!stopwords.contains(word_list[i]) &&
        std::find(pool.begin(), pool.end(), word_list[i]) == pool.end())
      pool.push_back(word_list[i]);
  if (static_cast<std::size_t>(set_size) > pool.size())
    throw ContractError("only " + std::to_string(pool.size()) + " candidate words for sets of " +
                        std::to_string(set_size));
  Rng rng(seed);
  std::vector<std::vector<std::string>> sets;
  for (int s = 0; s < n_sets; ++s) {
    // Partial Fisher-Yates: the first set_size slots are a uniform draw.
    std::vector<std::string> p = pool;
    for (int i = 0; i < set_size; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.below(p.size() - static_cast<std::size_t>(i));
      std::swap(p[static_cast<std::size_t>(i)], p[j]);
    }
    sets.emplace_back(p.begin(), p.begin() + set_size);
  }
  return sets;
}

void ExperimentSpec::validate() const {
  if (lambda0_grid.empty() || strategy_grid.empty() || algorithm_grid.empty() || seeds.empty())
    throw ContractError("experiment grids must be nonempty");
  for (double l : lambda0_grid)
    if (!(l >= 0.0)) throw ContractError("lambda0 values must be >= 0");
  if (max_len < 1 || beam_width < 1 || !(nucleus_p > 0.0 && nucleus_p <= 1.0))
    throw ContractError("invalid decode defaults");
}

namespace {

template <typename T>
void read_opt(const json& doc, const char* key, T& out) {
  if (doc.contains(key) && !doc[key].is_null()) out = doc[key].get<T>();
}

}  // namespace

ExperimentSpec parse_experiment_spec(const json& doc) {
  ExperimentSpec s;
  try {
    read_opt(doc, "keyword_sets", s.keyword_sets);
    read_opt(doc, "lambda0_grid", s.lambda0_grid);
    if (doc.contains("strategy_grid")) {
      s.strategy_grid.clear();
      for (const auto& v : doc["strategy_grid"]) s.strategy_grid.push_back(parse_strategy(v.get<std::string>()));
    }
    if (doc.contains("algorithm_grid")) {
      s.algorithm_grid.clear();
      for (const auto& v : doc["algorithm_grid"]) s.algorithm_grid.push_back(parse_algorithm(v.get<std::string>()));
    }
    read_opt(doc, "seeds", s.seeds);
    read_opt(doc, "max_len", s.max_len);
    read_opt(doc, "nucleus_p", s.nucleus_p);
    read_opt(doc, "beam_width", s.beam_width);
    read_opt(doc, "growth_c", s.growth_c);
    read_opt(doc, "annealing", s.annealing);
    if (doc.contains("similarity")) {
      const auto sim = doc["similarity"].get<std::string>();
      if (sim == "semantic") s.similarity = SimilarityMode::semantic;
      else if (sim == "exact") s.similarity = SimilarityMode::exact;
      else throw ContractError("similarity must be 'semantic' or 'exact'");
    }
    read_opt(doc, "prompt", s.prompt);
    read_opt(doc, "word_list", s.word_list);
    read_opt(doc, "stopwords", s.stopwords);
    read_opt(doc, "n_sets", s.n_sets);
    read_opt(doc, "set_size", s.set_size);
    read_opt(doc, "keyword_seed", s.keyword_seed);
    read_opt(doc, "embeddings", s.embeddings);
    read_opt(doc, "lm", s.lm);
    read_opt(doc, "corpus", s.corpus);
    read_opt(doc, "order", s.order);
    read_opt(doc, "smoothing", s.smoothing);
    read_opt(doc, "eval_lm", s.eval_lm);
    read_opt(doc, "eval_corpus", s.eval_corpus);
    read_opt(doc, "eval_order", s.eval_order);
    read_opt(doc, "output", s.output);
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open experiment spec '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  return parse_experiment_spec(doc);
}

namespace {

std::unique_ptr<NGramModel> load_or_train(const std::string& lm_path, const std::string& corpus_path, int order,
                                          double k, const Vocabulary* shared_vocab) {
  if (!lm_path.empty()) return std::make_unique<NGramModel>(NGramModel::load_file(lm_path));
  if (corpus_path.empty()) throw ContractError("need either a model file or a corpus");
  const auto corpus = read_corpus_file(corpus_path);
  const Vocabulary vocab = shared_vocab ? *shared_vocab : make_word_vocabulary(corpus);
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(corpus.size());
  for (const auto& s : corpus) ids.push_back(encode_sentence(vocab, s));
  return std::make_unique<NGramModel>(NGramModel::train(ids, vocab, order, k));
}

}  // namespace

LoadedResources load_resources(const ExperimentSpec& spec) {
  LoadedResources r;
  if (spec.embeddings.empty()) throw ContractError("experiment spec needs an embeddings path");
  r.table = std::make_unique<EmbeddingTable>(load_embeddings_file(spec.embeddings));
  auto gen = load_or_train(spec.lm, spec.corpus, spec.order, spec.smoothing, nullptr);
  const Vocabulary vocab = gen->vocabulary();
  r.model = std::move(gen);
  if (spec.eval_lm.empty() && spec.eval_corpus.empty())
    throw ContractError("experiment spec needs a separate evaluation model (eval_lm or eval_corpus)");
  r.eval_model = load_or_train(spec.eval_lm, spec.eval_corpus, spec.eval_order, spec.smoothing, &vocab);
  return r;
}

std::vector<std::vector<std::string>> resolve_keyword_sets(const ExperimentSpec& spec) {
  if (!spec.keyword_sets.empty()) return spec.keyword_sets;
  if (spec.word_list.empty()) throw ContractError("experiment spec needs keyword_sets or a word_list");
  std::unordered_set<std::string> stop;
  if (!spec.stopwords.empty()) stop = read_word_set(spec.stopwords);
  return build_keyword_sets(read_word_list(spec.word_list), stop, spec.n_sets, spec.set_size, spec.keyword_seed);
}

TextScores score_generation(const GenerationResult& g, std::span<const std::string> keywords,
                            LanguageModel& eval_model, std::span<const TokenId> prompt,
                            const Vocabulary& gen_vocab) {
  TextScores s;
  const Vocabulary& ev = eval_model.vocabulary();
  std::vector<TokenId> tokens;
  std::vector<TokenId> prefix;
  if (ev == gen_vocab) {
    tokens = g.token_ids;
    prefix.assign(prompt.begin(), prompt.end());
  } else {
    tokens = ev.encode(g.text);
    if (!g.token_ids.empty() && g.token_ids.back() == gen_vocab.eos()) tokens.push_back(ev.eos());
    prefix = {ev.bos()};
    auto p = ev.encode(gen_vocab.decode(prompt));
    prefix.insert(prefix.end(), p.begin(), p.end());
  }
  s.ppl = tokens.empty() ? std::nan("") : perplexity(tokens, eval_model, prefix);
  std::vector<std::string> words;
  for (auto& tok : tokenize(g.text))
    if (is_word_token(tok)) words.push_back(std::move(tok));
  s.rep = repetition_4gram(words);
  const std::vector<std::string> texts = {g.text};
  const std::vector<std::vector<std::string>> sets = {std::vector<std::string>(keywords.begin(), keywords.end())};
  s.sr = success_rate(texts, sets);
  return s;
}

std::vector<CellResult> run_experiment(const ExperimentSpec& spec, const ExperimentResources& res,
                                       const RunOptions& options) {
  spec.validate();
  if (!res.table || !res.model || !res.eval_model) throw ContractError("experiment resources are incomplete");
  const auto sets = resolve_keyword_sets(spec);
  if (sets.empty()) throw ContractError("experiment has no keyword sets");
  const Vocabulary& vocab = res.model->vocabulary();
  std::vector<TokenId> prompt = {vocab.bos()};
  {
    auto p = vocab.encode(spec.prompt);
    prompt.insert(prompt.end(), p.begin(), p.end());
  }
  std::vector<std::vector<GuideWord>> guides;
  for (const auto& set : sets) guides.push_back(make_guide_words(set, vocab, *res.table));

  std::vector<CellResult> cells;
  int cell_id = 0;
  for (Algorithm algorithm : spec.algorithm_grid) {
    for (Strategy strategy : spec.strategy_grid) {
      for (double lambda0 : spec.lambda0_grid) {
        CellResult cell;
        cell.cell_id = cell_id;
        cell.lambda0 = lambda0;
        cell.strategy = strategy;
        cell.algorithm = algorithm;
        std::vector<double> ppl_runs, rep_runs, sr_runs;
        try {
          for (std::size_t run = 0; run < spec.seeds.size(); ++run) {
            double ppl_sum = 0.0, rep_sum = 0.0;
            std::vector<GenerationResult> results;
            for (std::size_t si = 0; si < sets.size(); ++si) {
              DecodeConfig cfg;
              cfg.algorithm = algorithm;
              cfg.nucleus_p = spec.nucleus_p;
              cfg.beam_width = spec.beam_width;
              cfg.max_len = spec.max_len;
              cfg.seed = mix_seed({spec.seeds[run], static_cast<std::uint64_t>(cell_id), si, run});
              cfg.strategy = strategy;
              cfg.lambda0 = lambda0;
              cfg.growth_c = spec.growth_c;
              cfg.annealing_enabled = spec.annealing;
              cfg.similarity = spec.similarity;
              auto g = decode(cfg, prompt, guides[si], *res.model, *res.table);
              const auto scores = score_generation(g, sets[si], *res.eval_model, prompt, vocab);
              ppl_sum += scores.ppl;
              rep_sum += scores.rep;
              results.push_back(std::move(g));
            }
            const auto n = static_cast<double>(sets.size());
            ppl_runs.push_back(ppl_sum / n);
            rep_runs.push_back(100.0 * rep_sum / n);
            sr_runs.push_back(success_rate(results, sets));
            if (options.keep_generations)
              for (auto& g : results) cell.generations.push_back(std::move(g));
          }
          cell.ppl = aggregate(ppl_runs);
          cell.rep = aggregate(rep_runs);
          cell.sr = aggregate(sr_runs);
        } catch (const Error& e) {
          cell.failures = 1;
          cell.failure_message = e.what();
          const double nan = std::nan("");
          cell.ppl = cell.rep = cell.sr = Summary{nan, nan, false};
          spdlog::error("cell {} failed: {}", cell_id, e.what());
        }
        cells.push_back(std::move(cell));
        ++cell_id;
      }
    }
  }
  return cells;
}

std::string format_csv(std::span<const CellResult> cells) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const auto& c : cells) {
    out += fmt::format("{},{:g},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", c.cell_id, c.lambda0,
                       to_string(c.strategy), to_string(c.algorithm), c.ppl.mean, c.ppl.stddev, c.rep.mean,
                       c.rep.stddev, c.sr.mean, c.sr.stddev, c.failures);
  }
  return out;
}

}  // namespace k2t
