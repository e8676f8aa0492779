#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "k2t/decoding.hpp"
#include "k2t/error.hpp"
#include "k2t/ngram.hpp"
#include "support.hpp"

using namespace k2t;
using k2t::test::FunctionModel;
using k2t::test::table_of;
using k2t::test::vocab_of;

namespace {

NGramModel random_bigram(const Vocabulary& v, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<TokenId>> corpus;
  for (int s = 0; s < 6; ++s) {
    std::vector<TokenId> seq = {v.bos()};
    for (std::uint64_t i = 0, n = 1 + rng.below(4); i < n; ++i)
      seq.push_back(static_cast<TokenId>(2 + rng.below(v.size() - 2)));
    seq.push_back(v.eos());
    corpus.push_back(seq);
  }
  return NGramModel::train(corpus, v, 2, 0.3);
}

DecodeConfig config(Algorithm a, double lambda0, bool anneal, int T, std::uint64_t seed = 1) {
  DecodeConfig c;
  c.algorithm = a;
  c.lambda0 = lambda0;
  c.annealing_enabled = anneal;
  c.max_len = T;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("nucleus_filter") {
  const std::vector<double> p = {0.5, 0.3, 0.15, 0.05};
  const auto f = nucleus_filter(p, 0.9);
  CHECK(f[0] == doctest::Approx(0.5 / 0.95).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.3 / 0.95).epsilon(1e-15));
  CHECK(f[2] == doctest::Approx(0.15 / 0.95).epsilon(1e-15));
  CHECK(f[3] == 0.0);
  CHECK(std::abs(f[0] - 0.5263) < 1e-4);
  CHECK(std::abs(f[1] - 0.3158) < 1e-4);
  CHECK(std::abs(f[2] - 0.1579) < 1e-4);
  CHECK(nucleus_filter(p, 1.0) == p);
  const std::vector<double> hot = {0, 0, 1, 0};
  CHECK(nucleus_filter(hot, 0.3) == hot);
  CHECK_THROWS_AS(nucleus_filter(p, 0.0), ContractError);
  CHECK_THROWS_AS(nucleus_filter(std::vector<double>{0, 0}, 0.5), ContractError);
}

TEST_CASE("nucleus_filter keeps a minimal prefix") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p(2 + rng.below(10));
    double total = 0.0;
    for (auto& x : p) total += x = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    if (total == 0.0) continue;
    for (auto& x : p) x /= total;
    const double top_p = 0.05 + 0.95 * rng.uniform();
    const auto f = nucleus_filter(p, top_p);
    double kept = 0.0, smallest_kept = 2.0, largest_dropped = 0.0, sum_f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum_f += f[i];
      if (f[i] > 0) {
        kept += p[i];
        smallest_kept = std::min(smallest_kept, p[i]);
      } else {
        largest_dropped = std::max(largest_dropped, p[i]);
      }
    }
    CHECK(sum_f == doctest::Approx(1.0));
    CHECK(kept >= top_p * (1 - 1e-12));
    CHECK(smallest_kept >= largest_dropped);
    CHECK(kept - smallest_kept < top_p);  // dropping the smallest kept token falls short
  }
}

TEST_CASE("rerank") {
  BeamHypothesis h;
  h.token_ids = {3, 4, 5, 6};
  h.cum_logprob = -4.0;
  CHECK(rerank(h, RerankMode::length_norm) == -1.0);
  CHECK(rerank(h, RerankMode::word_count) == -1.0);
  const auto v = vocab_of({"a", "b", "c"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}});
  const std::vector<std::string> words = {"a", "b", "c"};
  GuidanceParams gp;
  h.guidance = make_guidance_state(make_guide_words(words, v, table), gp);
  h.guidance.remaining = {2};
  CHECK(rerank(h, RerankMode::word_count) == 1.0);
  BeamHypothesis empty;
  CHECK_THROWS_AS(rerank(empty, RerankMode::length_norm), ContractError);
}

TEST_CASE("algorithm names") {
  for (auto a : {Algorithm::nucleus, Algorithm::beam, Algorithm::beam_wc, Algorithm::beam_wc_nucleus})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK_THROWS_AS(parse_algorithm("greedy"), ContractError);
}

TEST_CASE("nucleus decode with a large shift emits the guide word first") {
  const auto v = vocab_of({"a", "b", "g"});
  const auto table = table_of({{"a", {0, 1}}, {"b", {-1, 0}}, {"g", {1, 0}}});
  FunctionModel m(v, [](std::span<const TokenId>) {
    return std::vector<double>{std::log(0.1), std::log(0.2), std::log(0.4), std::log(0.2), std::log(0.1)};
  });
  auto cfg = config(Algorithm::nucleus, 50.0, false, 3);
  cfg.nucleus_p = 1.0;
  // Brute force over the five shifted scores.
  std::vector<double> shifted = {std::log(0.1), std::log(0.2), std::log(0.4), std::log(0.2), std::log(0.1) + 50.0};
  const auto best = std::max_element(shifted.begin() + 1, shifted.end()) - shifted.begin();
  REQUIRE(best == 4);
  const std::vector<std::string> words = {"g"};
  const std::vector<TokenId> prompt = {0};
  const auto g = decode(cfg, prompt, make_guide_words(words, v, table), m, table);
  REQUIRE_FALSE(g.token_ids.empty());
  CHECK(g.token_ids.front() == 4);
  REQUIRE(g.satisfied.size() == 1);
  CHECK(g.satisfied[0].step == 1);
}

TEST_CASE("lambda zero without annealing reproduces unguided decoding") {
  const auto v = vocab_of({"a", "b", "c", "d", "e"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"d", {-1, 1}}, {"e", {2, 1}}});
  auto m = random_bigram(v, 4);
  const std::vector<TokenId> prompt = {0};
  const std::vector<std::string> words = {"c", "e"};
  for (auto a : {Algorithm::nucleus, Algorithm::beam}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto cfg = config(a, 0.0, false, 12, seed);
      const auto guided = decode(cfg, prompt, make_guide_words(words, v, table), m, table);
      const auto plain = decode(cfg, prompt, {}, m, table);
      CHECK(guided.token_ids == plain.token_ids);
    }
  }
}

TEST_CASE("beam width one is greedy over shifted scores") {
  const auto v = vocab_of({"a", "b", "c", "d"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"d", {-1, 1}}});
  auto m = random_bigram(v, 8);
  const std::vector<std::string> words = {"d"};
  auto cfg = config(Algorithm::beam, 1.5, false, 6);
  cfg.beam_width = 1;
  const std::vector<TokenId> prompt = {0};
  const auto guides = make_guide_words(words, v, table);
  const auto g = decode(cfg, prompt, guides, m, table);

  // Greedy reference written out step by step.
  std::vector<TokenId> ctx = prompt, out;
  bool satisfied = false;
  while (static_cast<int>(out.size()) < cfg.max_len) {
    auto lp = m.logprobs(ctx).values;
    if (!satisfied)
      for (std::size_t i = 2; i < lp.size(); ++i) {
        const double s = clipped_shift(table, v.token(static_cast<TokenId>(i)), "d");
        if (s != 0.0) lp[i] += 1.5 * s;
      }
    lp[0] = kNegInf;
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    out.push_back(best);
    ctx.push_back(best);
    if (best == v.eos()) break;
    if (v.token(best) == "d") satisfied = true;
  }
  CHECK(g.token_ids == out);
}

TEST_CASE("beam step keeps the best two of nine two-token sequences") {
  // Vocabulary {BOS, EOS, a, b}: three continuations per step. Probabilities
  // are chosen so the best two sequences share no prefix.
  const auto v = vocab_of({"a", "b"});
  FunctionModel m(v, [](std::span<const TokenId> ctx) {
    const std::map<TokenId, std::vector<double>> rows = {
        {0, {0.0, 0.2, 0.45, 0.35}},  // after BOS
        {2, {0.0, 0.1, 0.1, 0.8}},    // after a
        {3, {0.0, 0.1, 0.85, 0.05}},  // after b
    };
    const auto& r = rows.at(ctx.back());
    std::vector<double> lp;
    for (double x : r) lp.push_back(std::log(x));
    return lp;
  });
  EmbeddingTable table(2);
  auto cfg = config(Algorithm::beam, 0.0, false, 2);
  cfg.beam_width = 2;
  const std::vector<TokenId> prompt = {0};
  DecodeContext ctx(cfg, prompt, m, table);
  std::vector<BeamHypothesis> beam = {initial_hypothesis(cfg, {})};
  beam = beam_step(beam, ctx);
  beam = beam_step(beam, ctx);

  // Exhaustive: every y1 y2 with y1 in {EOS, a, b}; EOS ends the sequence.
  std::vector<std::pair<double, std::vector<TokenId>>> all;
  const std::vector<TokenId> ys = {1, 2, 3};
  for (TokenId y1 : ys) {
    const std::vector<TokenId> c1 = {0};
    const double l1 = m.logprobs(c1).values[static_cast<std::size_t>(y1)];
    if (y1 == 1) {
      all.push_back({l1, {y1}});
      continue;
    }
    for (TokenId y2 : ys) {
      const std::vector<TokenId> c2 = {0, y1};
      all.push_back({(l1 + m.logprobs(c2).values[static_cast<std::size_t>(y2)]) / 2.0, {y1, y2}});
    }
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  REQUIRE(beam.size() == 2);
  CHECK(beam[0].token_ids == all[0].second);
  CHECK(beam[1].token_ids == all[1].second);
}

TEST_CASE("pruning ties keep the smaller token tuple") {
  const auto v = vocab_of({"a", "b", "c"});
  FunctionModel m(v, [](std::span<const TokenId>) {
    return std::vector<double>{std::log(0.1), std::log(0.1), std::log(0.4), std::log(0.4), std::log(1e-300)};
  });
  EmbeddingTable table(2);
  auto cfg = config(Algorithm::beam, 0.0, false, 3);
  cfg.beam_width = 1;
  const std::vector<TokenId> prompt = {0};
  DecodeContext ctx(cfg, prompt, m, table);
  std::vector<BeamHypothesis> beam = {initial_hypothesis(cfg, {})};
  beam = beam_step(beam, ctx);
  REQUIRE(beam.size() == 1);
  CHECK(beam[0].token_ids == std::vector<TokenId>{2});
}

TEST_CASE("zero free budget writes out the guide words in order") {
  const auto v = vocab_of({"a", "b", "c", "d", "e"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"d", {-1, 1}}, {"e", {2, 1}}});
  auto m = random_bigram(v, 2);
  const std::vector<std::string> words = {"d", "a", "e"};
  for (auto a : {Algorithm::nucleus, Algorithm::beam, Algorithm::beam_wc, Algorithm::beam_wc_nucleus}) {
    for (auto s : {Strategy::fixed_order, Strategy::closest, Strategy::all, Strategy::random_pick}) {
      auto cfg = config(a, 5.0, true, 3);
      cfg.strategy = s;
      const std::vector<TokenId> prompt = {0};
      const auto g = decode(cfg, prompt, make_guide_words(words, v, table), m, table);
      CHECK(g.text == "d a e");
      CHECK(g.satisfied.size() == 3);
    }
  }
}

TEST_CASE("budget errors surface before decoding") {
  const auto v = vocab_of({"a", "b"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}});
  UniformModel m(v);
  const std::vector<std::string> words = {"a", "b"};
  const std::vector<TokenId> prompt = {0};
  CHECK_THROWS_AS(decode(config(Algorithm::nucleus, 5, true, 1), prompt, make_guide_words(words, v, table), m, table),
                  BudgetError);
  const std::vector<TokenId> no_bos = {2};
  CHECK_THROWS_AS(decode(config(Algorithm::nucleus, 5, true, 4), no_bos, {}, m, table), ContractError);
}

TEST_CASE("provider failures become decode errors with the step") {
  const auto v = vocab_of({"a", "b"});
  const auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}});
  FunctionModel m(v, [](std::span<const TokenId> ctx) -> std::vector<double> {
    if (ctx.size() > 2) throw ProviderError("backend gone");
    return {kNegInf, std::log(0.01), std::log(0.98), std::log(0.01)};
  });
  try {
    decode(config(Algorithm::nucleus, 0, false, 10), std::vector<TokenId>{0}, {}, m, table);
    FAIL("expected a decode error");
  } catch (const DecodeError& e) {
    CHECK(e.step() == 2);
  }
}

TEST_CASE("decoding is deterministic for every algorithm and strategy") {
  const auto& w = k2t::test::small_world();
  auto model = toy_generation_model(w, k2t::test::small_world_options());
  const std::vector<std::string> words = {"football", "space", "field"};
  const auto guides = make_guide_words(words, w.vocab, w.table);
  const std::vector<TokenId> prompt = {w.vocab.bos()};
  for (auto a : {Algorithm::nucleus, Algorithm::beam, Algorithm::beam_wc, Algorithm::beam_wc_nucleus})
    for (auto s : {Strategy::fixed_order, Strategy::closest, Strategy::all, Strategy::random_pick}) {
      auto cfg = config(a, 5.0, true, 25, 77);
      cfg.strategy = s;
      cfg.record_trace = true;
      const auto g1 = decode(cfg, prompt, guides, model, w.table);
      const auto g2 = decode(cfg, prompt, guides, model, w.table);
      CHECK(g1.token_ids == g2.token_ids);
      CHECK(g1.per_step_trace.size() == g1.token_ids.size());
      CHECK(g1.token_ids.size() <= 25);
      for (const auto& word : words) CHECK_MESSAGE(contains_keyword(g1.text, stem(word)).found, g1.text);
    }
}

TEST_CASE("zero free budget forces every piece of a subword guide") {
  const std::string G = "\xC4\xA0";
  const Vocabulary v({"<s>", "</s>", G + "foot", "ball", G + "run", G + "dog"}, 0, 1);
  const auto table = table_of({{"football", {1, 0}}, {"run", {0, 1}}, {"dog", {1, 1}}});
  auto m = random_bigram(v, 5);
  const std::vector<std::string> words = {"run", "football"};
  for (auto a : {Algorithm::nucleus, Algorithm::beam, Algorithm::beam_wc, Algorithm::beam_wc_nucleus}) {
    const std::vector<TokenId> prompt = {0};
    const auto g = decode(config(a, 5.0, true, 3), prompt, make_guide_words(words, v, table), m, table);
    CHECK(g.token_ids == std::vector<TokenId>{4, 2, 3});
    CHECK(g.text == "run football");
  }
}
