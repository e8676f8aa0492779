#include "k2t/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "k2t/error.hpp"

namespace k2t {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::nucleus: return "ns";
    case Algorithm::beam: return "bs";
    case Algorithm::beam_wc: return "bswc";
    case Algorithm::beam_wc_nucleus: return "bswcns";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "ns" || name == "nucleus") return Algorithm::nucleus;
  if (name == "bs" || name == "beam") return Algorithm::beam;
  if (name == "bswc" || name == "beam_wc") return Algorithm::beam_wc;
  if (name == "bswcns" || name == "beam_wc_nucleus") return Algorithm::beam_wc_nucleus;
  throw ContractError("unknown decoding algorithm '" + std::string(name) + "'");
}

void DecodeConfig::validate() const {
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) throw ContractError("nucleus p must be in (0, 1]");
  if (beam_width < 1) throw ContractError("beam width must be >= 1");
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  if (!(lambda0 >= 0.0)) throw ContractError("lambda0 must be >= 0");
}

GuidanceParams DecodeConfig::guidance_params() const {
  GuidanceParams p;
  p.strategy = strategy;
  p.lambda0 = lambda0;
  p.growth_c = growth_c;
  p.max_len = max_len;
  p.annealing = annealing_enabled;
  p.similarity = similarity;
  return p;
}

std::vector<double> nucleus_filter(std::span<const double> probs, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ContractError("nucleus p must be in (0, 1]");
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  double total = 0.0;
  for (double v : probs) total += v;
  if (!(total > 0.0)) throw ContractError("nucleus filter on an all-zero distribution");
  std::vector<double> out(probs.size(), 0.0);
  double kept = 0.0;
  std::size_t n = 0;
  while (n < order.size() && probs[order[n]] > 0.0) {
    kept += probs[order[n]];
    ++n;
    if (kept >= p * total) break;
  }
  for (std::size_t i = 0; i < n; ++i) out[order[i]] = probs[order[i]] / kept;
  return out;
}

double rerank(const BeamHypothesis& hyp, RerankMode mode) {
  if (hyp.token_ids.empty()) throw ContractError("cannot re-rank an empty hypothesis");
  double score = hyp.cum_logprob / static_cast<double>(hyp.token_ids.size());
  if (mode == RerankMode::word_count) score += static_cast<double>(hyp.guidance.satisfied_count());
  return score;
}

namespace {

RerankMode rerank_mode(Algorithm a) {
  return a == Algorithm::beam ? RerankMode::length_norm
         : a == Algorithm::nucleus ? RerankMode::length_norm
                                   : RerankMode::word_count;
}

double pruning_score(const BeamHypothesis& hyp, RerankMode mode) {
  double score = hyp.cum_shifted / static_cast<double>(std::max<std::size_t>(hyp.token_ids.size(), 1));
  if (mode == RerankMode::word_count) score += static_cast<double>(hyp.guidance.satisfied_count());
  return score;
}

// Higher score first; ties go to the lexicographically smaller token tuple.
template <typename ScoreFn>
void rank(std::vector<BeamHypothesis>& pool, ScoreFn score) {
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) keyed.emplace_back(score(pool[i]), i);
  std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return pool[a.second].token_ids < pool[b.second].token_ids;
  });
  std::vector<BeamHypothesis> sorted;
  sorted.reserve(pool.size());
  for (const auto& [s, i] : keyed) sorted.push_back(std::move(pool[i]));
  pool = std::move(sorted);
}

void check_completed_word(BeamHypothesis& h, const std::string& text) {
  if (text.empty()) return;
  const int t = h.generated();
  for (int idx : update_state(h.guidance, text, t)) h.satisfied.push_back({h.guidance.word(idx).surface, t});
}

void flush_pending(BeamHypothesis& h) {
  if (h.pending_word.empty()) return;
  std::string word = std::move(h.pending_word);
  h.pending_word.clear();
  check_completed_word(h, word);
}

void push_token(BeamHypothesis& h, TokenId tok, double base_lp, double shifted, const Vocabulary& vocab) {
  h.token_ids.push_back(tok);
  h.cum_logprob += base_lp;
  h.cum_shifted += shifted;
  if (tok == vocab.eos() || tok == vocab.bos()) {
    flush_pending(h);
    if (tok == vocab.eos()) h.finished = true;
    return;
  }
  const std::string& text = vocab.token(tok);
  if (vocab.word_level()) {
    check_completed_word(h, text);
    return;
  }
  if (vocab.starts_word(tok)) {
    flush_pending(h);
    h.pending_word = text.substr(vocab.subword_marker()->size());
  } else {
    h.pending_word += text;
  }
}

void finish_if_full(BeamHypothesis& h, int max_len) {
  if (h.generated() >= max_len) h.finished = true;
  if (h.finished) flush_pending(h);
}

bool in_forcing_phase(const BeamHypothesis& h, int t) {
  return !h.guidance.done() && h.guidance.params.annealing && !std::isfinite(current_lambda(h.guidance, t));
}

BeamHypothesis expand_forced(const BeamHypothesis& h, DecodeContext& ctx) {
  BeamHypothesis child = h;
  flush_pending(child);
  const std::vector<TokenId> toks(force_tokens(child.guidance).begin(), force_tokens(child.guidance).end());
  for (TokenId tok : toks) {
    const int step = child.generated();
    const double lp = ctx.base_scores(child).values[static_cast<std::size_t>(tok)];
    push_token(child, tok, lp, lp, ctx.vocab());
    if (ctx.config().record_trace) child.trace.push_back({step, kForceLambda, tok, 0.0, true});
  }
  flush_pending(child);
  finish_if_full(child, ctx.config().max_len);
  return child;
}

// Draws one index from a distribution (entries summing to ~1), walking ids upward.
std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double v : probs) total += v;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  if (last == probs.size()) throw ContractError("sampling from an empty distribution");
  return last;
}

std::vector<TokenId> top_candidates(const ScoreVector& shifted, int k) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < shifted.size(); ++i)
    if (shifted.values[i] != kNegInf) ids.push_back(static_cast<TokenId>(i));
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(), [&](TokenId a, TokenId b) {
    const double sa = shifted.values[static_cast<std::size_t>(a)];
    const double sb = shifted.values[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  ids.resize(take);
  return ids;
}

std::vector<TokenId> sampled_candidates(const ScoreVector& shifted, int k, double p, Rng& rng) {
  auto probs = nucleus_filter(softmax(shifted.values), p);
  std::vector<TokenId> ids;
  for (int draw = 0; draw < k; ++draw) {
    double mass = 0.0;
    for (double v : probs) mass += v;
    if (!(mass > 0.0)) break;
    const std::size_t i = sample_index(probs, rng);
    ids.push_back(static_cast<TokenId>(i));
    probs[i] = 0.0;
  }
  return ids;
}

}  // namespace

DecodeContext::DecodeContext(const DecodeConfig& config, std::span<const TokenId> prompt, LanguageModel& model,
                             const EmbeddingTable& table)
    : config_(config),
      prompt_(prompt.begin(), prompt.end()),
      model_(model),
      shifts_(table, model.vocabulary(), config.similarity),
      rng_(config.seed) {
  config_.validate();
  if (prompt_.empty() || prompt_.front() != model.vocabulary().bos())
    throw ContractError("prompt must start with BOS");
}

ScoreVector DecodeContext::base_scores(const BeamHypothesis& hyp) {
  std::vector<TokenId> context = prompt_;
  context.insert(context.end(), hyp.token_ids.begin(), hyp.token_ids.end());
  ScoreVector sv = model_.logprobs(context);
  if (sv.size() != vocab().size()) throw ProviderError("score vector length does not match the vocabulary");
  sv.step_index = hyp.generated();
  return sv;
}

BeamHypothesis initial_hypothesis(const DecodeConfig& config, std::vector<GuideWord> guides) {
  BeamHypothesis h;
  h.guidance = make_guidance_state(std::move(guides), config.guidance_params());
  return h;
}

std::vector<BeamHypothesis> beam_step(std::span<const BeamHypothesis> hyps, DecodeContext& ctx) {
  const auto& cfg = ctx.config();
  const auto& vocab = ctx.vocab();
  const RerankMode mode = rerank_mode(cfg.algorithm);
  if (hyps.empty() || hyps.size() > static_cast<std::size_t>(cfg.beam_width))
    throw ContractError("beam_step needs between 1 and K hypotheses");
  const int width = cfg.algorithm == Algorithm::nucleus ? 1 : cfg.beam_width;
  const bool sampled = cfg.algorithm == Algorithm::nucleus || cfg.algorithm == Algorithm::beam_wc_nucleus;

  std::vector<BeamHypothesis> pool;
  for (const auto& h : hyps) {
    if (h.finished) {
      pool.push_back(h);
      continue;
    }
    const int t = h.generated();
    if (in_forcing_phase(h, t)) {
      pool.push_back(expand_forced(h, ctx));
      continue;
    }
    const ScoreVector base = ctx.base_scores(h);
    ScoreVector shifted = base;
    ShiftInfo info;
    if (!h.guidance.done()) {
      info = apply_shift(shifted, h.guidance, t, ctx.shifts(), ctx.rng());
      if (h.guidance.params.annealing) suppress_eos(shifted, h.guidance, vocab.eos());
    }
    shifted.values[static_cast<std::size_t>(vocab.bos())] = kNegInf;  // never a continuation
    const auto candidates =
        sampled ? sampled_candidates(shifted, width, cfg.nucleus_p, ctx.rng()) : top_candidates(shifted, width);
    for (TokenId tok : candidates) {
      const auto i = static_cast<std::size_t>(tok);
      BeamHypothesis child = h;
      push_token(child, tok, base.values[i], shifted.values[i], vocab);
      if (cfg.record_trace) child.trace.push_back({t, info.lambda, tok, shifted.values[i] - base.values[i], false});
      finish_if_full(child, cfg.max_len);
      pool.push_back(std::move(child));
    }
  }
  rank(pool, [&](const BeamHypothesis& x) { return pruning_score(x, mode); });
  if (pool.size() > static_cast<std::size_t>(width)) pool.resize(static_cast<std::size_t>(width));
  return pool;
}

GenerationResult decode(const DecodeConfig& config, std::span<const TokenId> prompt, std::vector<GuideWord> guides,
                        LanguageModel& model, const EmbeddingTable& table) {
  DecodeConfig cfg = config;
  if (cfg.algorithm == Algorithm::nucleus) cfg.beam_width = 1;
  DecodeContext ctx(cfg, prompt, model, table);
  std::vector<BeamHypothesis> beam = {initial_hypothesis(cfg, std::move(guides))};
  int step = 0;
  try {
    while (std::any_of(beam.begin(), beam.end(), [](const auto& h) { return !h.finished; })) {
      beam = beam_step(beam, ctx);
      ++step;
    }
  } catch (const ProviderError& e) {
    throw DecodeError(std::string("language model failed: ") + e.what(), step);
  }
  const RerankMode mode = rerank_mode(cfg.algorithm);
  rank(beam, [&](const BeamHypothesis& x) { return rerank(x, mode); });
  BeamHypothesis& best = beam.front();
  GenerationResult result;
  result.text = ctx.vocab().decode(best.token_ids);
  result.token_ids = std::move(best.token_ids);
  result.per_step_trace = std::move(best.trace);
  result.satisfied = std::move(best.satisfied);
  result.cum_logprob = best.cum_logprob;
  return result;
}

}  // namespace k2t
