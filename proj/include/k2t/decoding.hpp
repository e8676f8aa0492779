#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "k2t/guidance.hpp"
#include "k2t/language_model.hpp"
#include "k2t/rng.hpp"
#include "k2t/semantic_space.hpp"

namespace k2t {

enum class Algorithm { nucleus, beam, beam_wc, beam_wc_nucleus };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct DecodeConfig {
  Algorithm algorithm = Algorithm::nucleus;
  double nucleus_p = 0.9;
  int beam_width = 4;
  int max_len = 90;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::closest;
  double lambda0 = 5.0;
  double growth_c = 100.0;
  bool annealing_enabled = true;
  SimilarityMode similarity = SimilarityMode::semantic;
  bool record_trace = false;

  void validate() const;
  GuidanceParams guidance_params() const;
};

struct TraceStep {
  int step = 0;
  double lambda = 0.0;  // kForceLambda while forcing
  TokenId token = 0;
  double shift = 0.0;  // shift added to the chosen token's score
  bool forced = false;
};

struct Satisfaction {
  std::string word;
  int step = 0;  // generated-token count when the word was satisfied
};

struct BeamHypothesis {
  std::vector<TokenId> token_ids;  // generated tokens, prompt excluded
  double cum_logprob = 0.0;        // under the unshifted base model
  double cum_shifted = 0.0;        // sum of shifted scores
  GuidanceState guidance;
  bool finished = false;
  std::string pending_word;  // subword pieces of a word not yet complete
  std::vector<Satisfaction> satisfied;
  std::vector<TraceStep> trace;

  int generated() const { return static_cast<int>(token_ids.size()); }
};

struct GenerationResult {
  std::vector<TokenId> token_ids;  // generated tokens, prompt excluded
  std::string text;
  std::vector<TraceStep> per_step_trace;
  std::vector<Satisfaction> satisfied;
  double cum_logprob = 0.0;
};

// Smallest prefix of tokens by descending probability (ties: lower id first)
// whose mass reaches p, renormalized; every other entry becomes 0. Throws
// ContractError on an all-zero input or p outside (0, 1].
std::vector<double> nucleus_filter(std::span<const double> probs, double p);

enum class RerankMode { length_norm, word_count };

// length_norm: cum_logprob / |generated|; word_count adds the number of
// satisfied guide words. Throws ContractError for an empty hypothesis.
double rerank(const BeamHypothesis& hyp, RerankMode mode);

// Everything one generation needs besides its hypotheses. Owns the RNG and
// the shift cache, so it must not be shared between generations.
class DecodeContext {
 public:
  DecodeContext(const DecodeConfig& config, std::span<const TokenId> prompt, LanguageModel& model,
                const EmbeddingTable& table);

  const DecodeConfig& config() const { return config_; }
  LanguageModel& model() { return model_; }
  const Vocabulary& vocab() const { return model_.vocabulary(); }
  std::span<const TokenId> prompt() const { return prompt_; }
  ShiftTable& shifts() { return shifts_; }
  Rng& rng() { return rng_; }

  ScoreVector base_scores(const BeamHypothesis& hyp);

 private:
  DecodeConfig config_;
  std::vector<TokenId> prompt_;
  LanguageModel& model_;
  ShiftTable shifts_;
  Rng rng_;
};

BeamHypothesis initial_hypothesis(const DecodeConfig& config, std::vector<GuideWord> guides);

// One expansion round: every live hypothesis is extended (top candidates, or
// nucleus samples without replacement for beam_wc_nucleus, or its forced
// word), finished ones are carried over, and the pool is cut to the beam
// width by the algorithm's re-ranking score on the shifted sums.
std::vector<BeamHypothesis> beam_step(std::span<const BeamHypothesis> hyps, DecodeContext& ctx);

// Full generation. prompt must start with BOS. Throws BudgetError before
// decoding if the guide words cannot fit, DecodeError if the provider fails.
GenerationResult decode(const DecodeConfig& config, std::span<const TokenId> prompt, std::vector<GuideWord> guides,
                        LanguageModel& model, const EmbeddingTable& table);

}  // namespace k2t
