// Acceptance checks: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "k2t/decoding.hpp"
#include "k2t/error.hpp"
#include "k2t/experiment.hpp"
#include "k2t/metrics.hpp"
#include "k2t/ngram.hpp"
#include "k2t/toy_world.hpp"

using namespace k2t;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS  " : "FAIL  ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

struct Toy {
  ToyWorldOptions options;
  ToyWorld world;
  NGramModel gen;
  NGramModel eval;
  std::vector<std::string> word_list;
  std::unordered_set<std::string> stopwords;
};

Toy make_toy() {
  auto words = read_word_list(K2T_DATA_DIR "/common_words_1000.txt");
  auto stop = read_word_set(K2T_DATA_DIR "/stopwords.txt");
  ToyWorldOptions o;
  auto world = build_toy_world(words, stop, o);
  auto gen = toy_generation_model(world, o);
  auto eval = toy_evaluation_model(world, o);
  return {o, std::move(world), std::move(gen), std::move(eval), std::move(words), std::move(stop)};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void hard_guarantee(Toy& toy) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec spec;
  spec.keyword_sets = build_keyword_sets(toy.word_list, toy.stopwords, 50, 5, 0);
  spec.lambda0_grid = {5.0};
  spec.strategy_grid = {Strategy::fixed_order, Strategy::closest, Strategy::all, Strategy::random_pick};
  spec.algorithm_grid = {Algorithm::nucleus, Algorithm::beam, Algorithm::beam_wc, Algorithm::beam_wc_nucleus};
  spec.seeds = {0, 1, 2};
  spec.annealing = true;
  const auto cells = run_experiment(spec, {&toy.world.table, &toy.gen, &toy.eval});
  const double secs = seconds_since(t0);
  int perfect = 0;
  std::string worst;
  for (const auto& c : cells) {
    if (c.failures == 0 && c.sr.mean == 100.0 && c.sr.stddev == 0.0) ++perfect;
    else worst += fmt::format(" [{} {} sr={}]", to_string(c.strategy), to_string(c.algorithm), c.sr.mean);
  }
  report(perfect == static_cast<int>(cells.size()) && secs < 120.0, "hard-constraint guarantee",
         fmt::format("{}/{} cells at 100.0% (50 sets x 3 seeds each), {:.1f}s{}", perfect, cells.size(), secs,
                     worst));
}

void identity_limit(Toy& toy) {
  Rng rng(101);
  const auto sets = build_keyword_sets(toy.word_list, toy.stopwords, 10, 5, 77);
  const std::vector<TokenId> prompt = {toy.world.vocab.bos()};
  int same = 0;
  for (int i = 0; i < 10; ++i) {
    DecodeConfig cfg;
    cfg.algorithm = i % 2 == 0 ? Algorithm::nucleus : Algorithm::beam;
    cfg.strategy = static_cast<Strategy>(rng.below(4));
    cfg.lambda0 = 0.0;
    cfg.annealing_enabled = false;
    cfg.max_len = 10 + static_cast<int>(rng.below(60));
    cfg.seed = rng.below(1u << 30);
    const auto guides = make_guide_words(sets[static_cast<std::size_t>(i)], toy.world.vocab, toy.world.table);
    const auto guided = decode(cfg, prompt, guides, toy.gen, toy.world.table);
    const auto plain = decode(cfg, prompt, {}, toy.gen, toy.world.table);
    if (guided.token_ids == plain.token_ids) ++same;
  }
  report(same == 10, "identity limit", fmt::format("{}/10 cases bit-identical (ns and bs)", same));
}

void strength_trend(Toy& toy) {
  const std::vector<double> lambdas = {0, 5, 10, 20};
  auto sweep = [&](SimilarityMode mode) {
    ExperimentSpec spec;
    spec.keyword_sets = build_keyword_sets(toy.word_list, toy.stopwords, 50, 5, 0);
    spec.lambda0_grid = lambdas;
    spec.strategy_grid = {Strategy::closest};
    spec.algorithm_grid = {Algorithm::nucleus};
    spec.seeds = {1, 2};
    spec.annealing = false;
    spec.similarity = mode;
    std::vector<double> sr;
    for (const auto& c : run_experiment(spec, {&toy.world.table, &toy.gen, &toy.eval})) sr.push_back(c.sr.mean);
    return sr;
  };
  const auto context = sweep(SimilarityMode::semantic);
  const auto words_only = sweep(SimilarityMode::exact);
  bool increasing = true;
  for (std::size_t i = 1; i < context.size(); ++i) increasing = increasing && context[i] > context[i - 1];
  const bool dominates = context[2] >= words_only[2] && context[3] >= words_only[3];
  report(increasing && dominates, "guidance strength trend",
         fmt::format("context SR {:.1f}/{:.1f}/{:.1f}/{:.1f}, words-only SR {:.1f}/{:.1f}/{:.1f}/{:.1f} "
                     "at lambda 0/5/10/20 (100 generations per cell)",
                     context[0], context[1], context[2], context[3], words_only[0], words_only[1], words_only[2],
                     words_only[3]));
}

void annealing_oracle() {
  Rng rng(4242);
  int ok = 0, boundary_ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int T = 2 + static_cast<int>(rng.below(199));
    const int W = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(10, T - 1))));
    const int t_n = static_cast<int>(rng.below(static_cast<std::uint64_t>(T - W)));
    const int t = t_n + static_cast<int>(rng.below(static_cast<std::uint64_t>(T - W - t_n + 1)));
    const double lambda0 = 20.0 * rng.uniform();
    const double c = 0.01 + 200.0 * rng.uniform();

    std::vector<GuideWord> words(static_cast<std::size_t>(W));
    for (int k = 0; k < W; ++k) words[static_cast<std::size_t>(k)].token_ids = {k};
    GuidanceParams params;
    params.lambda0 = lambda0;
    params.growth_c = c;
    params.max_len = T;
    params.annealing = true;
    auto state = make_guidance_state(words, params);
    state.last_satisfied_step = t_n;

    const double expected = t < T - W ? lambda0 * std::exp(c * (t - t_n) / static_cast<double>(T - W - t_n))
                                      : std::numeric_limits<double>::infinity();
    const double got = current_lambda(state, t);
    bool match;
    if (std::isinf(expected)) {
      match = std::isinf(got) && got > 0;
    } else {
      const double rel = expected == 0.0 ? std::abs(got) : std::abs(got - expected) / std::abs(expected);
      worst = std::max(worst, rel);
      match = rel <= 1e-12;
    }
    ok += match;
    const double at_boundary = current_lambda(state, T - W);
    boundary_ok += std::isinf(at_boundary) && at_boundary > 0;
  }
  report(ok == 1000 && boundary_ok == 1000, "annealing formula oracle",
         fmt::format("{}/1000 tuples within 1e-12 (worst rel {:.2e}), {}/1000 boundaries infinite", ok, worst,
                     boundary_ok));
}

// Best sequence by length-normalized log-probability, searched exhaustively.
// Sequences stop at EOS or after T tokens; BOS is never generated.
std::vector<TokenId> exhaustive_best(NGramModel& m, int T) {
  const auto& v = m.vocabulary();
  std::vector<TokenId> best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<TokenId> ctx = {v.bos()};
  std::vector<TokenId> seq;
  std::function<void(double)> go = [&](double lp) {
    const auto scores = m.logprobs(ctx).values;
    for (TokenId y = 0; y < static_cast<TokenId>(v.size()); ++y) {
      if (y == v.bos()) continue;
      const double total = lp + scores[static_cast<std::size_t>(y)];
      seq.push_back(y);
      if (y == v.eos() || static_cast<int>(seq.size()) == T) {
        const double s = total / static_cast<double>(seq.size());
        if (s > best_score || (s == best_score && seq < best)) {
          best_score = s;
          best = seq;
        }
      } else {
        ctx.push_back(y);
        go(total);
        ctx.pop_back();
      }
      seq.pop_back();
    }
  };
  go(0.0);
  return best;
}

NGramModel random_model(Rng& rng, int vocab_size) {
  std::vector<std::string> tokens = {"<s>", "</s>"};
  for (int i = 2; i < vocab_size; ++i) tokens.push_back("w" + std::to_string(i));
  Vocabulary v(tokens, 0, 1);
  std::vector<std::vector<TokenId>> corpus;
  for (std::uint64_t s = 0, n = 1 + rng.below(8); s < n; ++s) {
    std::vector<TokenId> seq = {0};
    for (std::uint64_t i = 0, len = rng.below(6); i < len; ++i)
      seq.push_back(static_cast<TokenId>(2 + rng.below(static_cast<std::uint64_t>(vocab_size - 2))));
    seq.push_back(1);
    corpus.push_back(std::move(seq));
  }
  const int order = 1 + static_cast<int>(rng.below(3));
  return NGramModel::train(corpus, v, order, 0.05 + rng.uniform());
}

void beam_oracle() {
  Rng rng(31337);
  EmbeddingTable table(2);
  int total = 0, agree = 0;
  std::map<int, std::pair<int, int>> by_width;  // K -> (agree, total)
  int exact_total = 0, exact_agree = 0;
  std::string example;
  for (int model_index = 0; model_index < 100; ++model_index) {
    const int vocab_size = 3 + model_index % 4;
    auto m = random_model(rng, vocab_size);
    for (int T = 1; T <= 4; ++T) {
      const auto truth = exhaustive_best(m, T);
      auto run = [&](int K) {
        DecodeConfig cfg;
        cfg.algorithm = Algorithm::beam;
        cfg.beam_width = K;
        cfg.max_len = T;
        cfg.lambda0 = 0.0;
        cfg.annealing_enabled = false;
        return decode(cfg, std::vector<TokenId>{0}, {}, m, table).token_ids;
      };
      for (int K = 1; K <= 3; ++K) {
        const bool same = run(K) == truth;
        ++total;
        agree += same;
        by_width[K].first += same;
        by_width[K].second += 1;
        if (!same && example.empty())
          example = fmt::format(" first miss: model {} |V|={} T={} K={}", model_index, vocab_size, T, K);
      }
      // A beam at least as wide as the number of live prefixes is exhaustive.
      const int wide = static_cast<int>(std::pow(vocab_size - 1, std::max(T - 1, 0)));
      ++exact_total;
      exact_agree += run(wide) == truth;
    }
  }
  std::string widths;
  for (const auto& [K, counts] : by_width) widths += fmt::format(" K={}: {}/{}", K, counts.first, counts.second);
  report(agree == total, "beam oracle",
         fmt::format("{}/{} (model, T, K) cases match exhaustive top-1;{};{} (reference: K >= (|V|-1)^(T-1) "
                     "matches {}/{})",
                     agree, total, widths, example, exact_agree, exact_total));
}

void shift_oracle() {
  Rng rng(555);
  int ok = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Four tokens: BOS, EOS and two words; the two words are the guides.
    // With both guides in the vocabulary this is the smallest interesting case,
    // so run it with random geometry, random scores and random steps.
    const std::vector<std::string> names = {"alpha", "beta"};
    Vocabulary vocab({"<s>", "</s>", names[0], names[1]}, 0, 1);
    const std::size_t dim = 2 + rng.below(4);
    EmbeddingTable table(dim);
    std::map<std::string, std::vector<double>> vecs;
    for (const auto& n : names) {
      std::vector<double> v(dim);
      for (auto& x : v) x = rng.normal();
      table.insert(n, v);
      vecs[n] = v;
    }
    const auto guides = make_guide_words(names, vocab, table);
    for (auto strategy : {Strategy::fixed_order, Strategy::closest, Strategy::all, Strategy::random_pick}) {
      GuidanceParams params;
      params.strategy = strategy;
      params.lambda0 = 10.0 * rng.uniform();
      params.growth_c = 1.0 + 10.0 * rng.uniform();
      params.max_len = 20;
      params.annealing = rng.uniform() < 0.5;
      auto state = make_guidance_state(guides, params);
      if (rng.uniform() < 0.3) state.remaining = {1};
      const int t = static_cast<int>(rng.below(10));
      ScoreVector scores;
      for (int i = 0; i < 4; ++i) scores.values.push_back(-5.0 * rng.uniform());
      const auto base = scores.values;
      const std::uint64_t seed = rng.below(1u << 20);
      ShiftTable shifts(table, vocab, SimilarityMode::semantic);
      Rng draw(seed);
      apply_shift(scores, state, t, shifts, draw);

      // Independent evaluation.
      const double lambda_t = params.annealing
                                  ? params.lambda0 * std::exp(params.growth_c * t /
                                                              static_cast<double>(20 - static_cast<int>(state.remaining.size())))
                                  : params.lambda0;
      auto cosine = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t d = 0; d < dim; ++d) dot += a[d] * b[d];
        for (std::size_t d = 0; d < dim; ++d) na += a[d] * a[d];
        for (std::size_t d = 0; d < dim; ++d) nb += b[d] * b[d];
        return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
      };
      std::vector<std::string> remaining;
      for (int idx : state.remaining) remaining.push_back(names[static_cast<std::size_t>(idx)]);
      std::string picked;
      if (strategy == Strategy::random_pick) {
        Rng replay(seed);
        picked = remaining[replay.below(remaining.size())];
      }
      bool all_equal = true;
      for (TokenId id = 0; id < 4; ++id) {
        double shift = 0.0;
        if (id >= 2) {
          const auto& tv = vecs[vocab.token(id)];
          auto clipped = [&](const std::string& g) { return std::max(0.0, cosine(tv, vecs[g])); };
          switch (strategy) {
            case Strategy::fixed_order: shift = clipped(remaining.front()); break;
            case Strategy::random_pick: shift = clipped(picked); break;
            case Strategy::closest:
              for (const auto& g : remaining) shift = std::max(shift, clipped(g));
              break;
            case Strategy::all:
              for (const auto& g : remaining) shift += clipped(g);
              break;
          }
        }
        const double expected = shift == 0.0 ? base[static_cast<std::size_t>(id)]
                                              : base[static_cast<std::size_t>(id)] + lambda_t * shift;
        all_equal = all_equal && scores.values[static_cast<std::size_t>(id)] == expected;
      }
      ++total;
      ok += all_equal;
    }
  }
  report(ok == total, "shift oracle",
         fmt::format("{}/{} random cases (4-token vocabulary, 2 guides, all strategies) exactly equal", ok, total));
}

void metric_fixtures() {
  std::vector<std::string> problems;
  const double rep = repetition_4gram(tokenize("a b c d a b c d"));
  if (std::abs(rep - 0.2) > 1e-12) problems.push_back(fmt::format("repetition {}", rep));

  // |V| = 4 must come out as 4.0 bit for bit. Other sizes carry the rounding
  // of log(1/|V|) itself, so they are held to a few ulps.
  int four_exact = 0, four_total = 0;
  std::int64_t worst_ulps = 0;
  Rng rng(12);
  for (int n = 2; n <= 12; ++n) {
    std::vector<std::string> toks = {"<s>", "</s>"};
    for (int i = 2; i < n; ++i) toks.push_back("t" + std::to_string(i));
    UniformModel m(Vocabulary(toks, 0, 1));
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<TokenId> seq;
      for (std::uint64_t i = 0, len = 1 + rng.below(200); i < len; ++i)
        seq.push_back(static_cast<TokenId>(1 + rng.below(static_cast<std::uint64_t>(n - 1))));
      const double ppl = perplexity(seq, m);
      if (n == 4) {
        ++four_total;
        four_exact += ppl == 4.0;
      }
      std::int64_t a, b;
      const double target = n;
      std::memcpy(&a, &ppl, sizeof a);
      std::memcpy(&b, &target, sizeof b);
      worst_ulps = std::max(worst_ulps, a > b ? a - b : b - a);
    }
  }
  if (four_exact != four_total) problems.push_back(fmt::format("uniform |V|=4 exact in {}/{}", four_exact, four_total));
  if (worst_ulps > 4) problems.push_back(fmt::format("uniform ppl off by {} ulps", worst_ulps));

  std::ifstream in(K2T_FIXTURE_DIR "/porter_pairs.tsv");
  std::string line;
  int pairs = 0, stem_ok = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    ++pairs;
    stem_ok += porter_stem(line.substr(0, tab)) == line.substr(tab + 1);
  }
  if (pairs < 50 || stem_ok != pairs) problems.push_back(fmt::format("porter {}/{}", stem_ok, pairs));

  const std::vector<std::string> texts = {"alpha beta gamma delta", "alpha beta gamma"};
  const std::vector<std::vector<std::string>> sets = {{"alpha", "beta", "gamma", "delta", "eps"},
                                                      {"alpha", "beta", "gamma", "zeta", "eta"}};
  const std::vector<std::vector<std::string>> hits = {{"alphas"}, {"gamma"}};
  const std::vector<std::vector<std::string>> misses = {{"x"}, {"y", "z"}};
  if (success_rate(texts, sets) != 70.0 || success_rate(texts, hits) != 100.0 || success_rate(texts, misses) != 0.0)
    problems.push_back("success rate");

  std::string detail = fmt::format("repetition {:.12f}, uniform |V|=4 ppl == 4.0 in {}/{}, |V| 2..12 within {} ulp, porter {}/{} pairs, "
                                   "SR 70/100/0",
                                   rep, four_exact, four_total, worst_ulps, stem_ok, pairs);
  for (const auto& p : problems) detail += "; bad " + p;
  report(problems.empty(), "metric fixtures", detail);
}

void zero_budget(Toy& toy) {
  Rng rng(2718);
  std::vector<std::string> pool;
  for (const auto& set : build_keyword_sets(toy.word_list, toy.stopwords, 40, 5, 3))
    pool.insert(pool.end(), set.begin(), set.end());
  int ok = 0;
  std::string miss;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> words;
    for (std::uint64_t k = 0, n = 1 + rng.below(6); k < n; ++k) {
      const auto& w = pool[rng.below(pool.size())];
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    const auto guides = make_guide_words(words, toy.world.vocab, toy.world.table);
    DecodeConfig cfg;
    cfg.algorithm = static_cast<Algorithm>(i % 4);
    cfg.strategy = static_cast<Strategy>(rng.below(4));
    cfg.seed = rng.below(1000);
    int budget = 0;
    for (const auto& g : guides) budget += static_cast<int>(g.token_ids.size());
    cfg.max_len = budget;
    const auto g = decode(cfg, std::vector<TokenId>{toy.world.vocab.bos()}, guides, toy.gen, toy.world.table);
    std::string expected;
    for (const auto& w : words) expected += (expected.empty() ? "" : " ") + w;
    if (g.text == expected) ++ok;
    else if (miss.empty()) miss = fmt::format("; e.g. '{}' vs '{}'", g.text, expected);
  }
  report(ok == 20, "zero-budget forcing", fmt::format("{}/20 guide lists written out verbatim{}", ok, miss));
}

void csv_determinism(Toy& toy) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "k2t_acceptance";
  fs::create_directories(dir);
  write_toy_world(toy.world, dir.string(), toy.options);
  const fs::path spec_path = dir / "spec.json";
  {
    std::ofstream out(spec_path);
    out << fmt::format(R"({{
  "word_list": "{0}/common_words_1000.txt", "stopwords": "{0}/stopwords.txt", "n_sets": 10,
  "lambda0_grid": [0, 5], "strategy_grid": ["closest", "random"], "algorithm_grid": ["ns", "bswcns"],
  "seeds": [1, 2], "max_len": 30,
  "embeddings": "{1}/embeddings.txt", "lm": "{1}/gen.lm", "eval_lm": "{1}/eval.lm"
}})",
                       K2T_DATA_DIR, dir.string());
  }
  auto once = [&] {
    const auto spec = load_experiment_spec(spec_path.string());
    const auto res = load_resources(spec);
    return format_csv(run_experiment(spec, res.view()));
  };
  const auto a = once();
  const auto b = once();
  const auto rows = std::count(a.begin(), a.end(), '\n') - 1;
  report(a == b && rows == 8, "determinism",
         fmt::format("two runs of one config file: {} ({} data rows, {} bytes)", a == b ? "byte-identical" : "differ",
                     rows, a.size()));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  try {
    Toy toy = make_toy();
    hard_guarantee(toy);
    identity_limit(toy);
    strength_trend(toy);
    annealing_oracle();
    beam_oracle();
    shift_oracle();
    metric_fixtures();
    zero_budget(toy);
    csv_determinism(toy);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criterion/criteria failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
