#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "k2t/language_model.hpp"
#include "k2t/rng.hpp"
#include "k2t/semantic_space.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

inline constexpr double kForceLambda = std::numeric_limits<double>::infinity();

struct GuideWord {
  std::string surface;
  std::string stem;
  std::string embedding_key;
  std::vector<TokenId> token_ids;
};

// Validates and tokenizes a guide word against the active vocabulary and
// embedding table. Throws ContractError / UnmappedWordError.
GuideWord make_guide_word(std::string_view surface, const Vocabulary& vocab, const EmbeddingTable& table);
std::vector<GuideWord> make_guide_words(std::span<const std::string> surfaces, const Vocabulary& vocab,
                                        const EmbeddingTable& table);

KeywordMatch contains_keyword(std::string_view text, const GuideWord& guide);

// How a candidate token is compared with a guide word. `exact` only rewards
// the guide word's own token (the "guide words only" ablation).
enum class SimilarityMode { semantic, exact };

struct GuidanceParams {
  Strategy strategy = Strategy::closest;
  double lambda0 = 5.0;
  double growth_c = 100.0;
  int max_len = 90;
  bool annealing = true;
  SimilarityMode similarity = SimilarityMode::semantic;
};

// Control state of one generation (or one beam hypothesis). Small value
// type; the guide list itself is shared read-only.
struct GuidanceState {
  std::shared_ptr<const std::vector<GuideWord>> words;
  std::vector<int> remaining;  // indices into *words, in original order
  GuidanceParams params;
  int last_satisfied_step = 0;

  bool done() const { return remaining.empty(); }
  std::size_t total_words() const { return words ? words->size() : 0; }
  std::size_t satisfied_count() const { return total_words() - remaining.size(); }
  const GuideWord& word(int index) const { return (*words)[static_cast<std::size_t>(index)]; }
  // Generation slots still needed to force every remaining word.
  int reserved_tokens() const;
};

// Throws BudgetError if annealing is on and max_len cannot fit every guide
// word's tokens.
GuidanceState make_guidance_state(std::vector<GuideWord> words, const GuidanceParams& params);

// Annealed shift strength at step t (number of tokens generated so far):
//   lambda0 * exp(c (t - t_n) / (T - R - t_n))   for t < T - R
//   kForceLambda                                 otherwise
// where R is reserved_tokens() (|W_t| for single-token guide words).
// Without annealing this is the constant lambda0.
double current_lambda(const GuidanceState& state, int t);

// Per-token shift values for the remaining guide words under the state's
// strategy. Builds each guide's similarity row once and caches combined rows
// by remaining set, so it is owned by exactly one generation.
class ShiftTable {
 public:
  ShiftTable(const EmbeddingTable& table, const Vocabulary& vocab, SimilarityMode mode);

  // `picked` is the random_pick word (index into state.words).
  std::span<const double> shifts(const GuidanceState& state, std::optional<int> picked = std::nullopt);
  std::span<const double> guide_row(const GuideWord& guide);

  std::size_t vocab_size() const { return token_keys_.size(); }

 private:
  const EmbeddingTable& table_;
  SimilarityMode mode_;
  std::vector<std::string> token_keys_;
  std::vector<std::optional<std::span<const double>>> token_vecs_;
  std::vector<double> token_norms_;
  std::map<std::string, std::vector<double>> rows_;
  std::map<std::vector<int>, std::vector<double>> combined_;
};

struct ShiftInfo {
  double lambda = 0.0;
  std::optional<int> picked;
};

// scores[i] += lambda_t * shift(i). Entries with zero shift are left
// untouched. No-op (and no random draw) when lambda_t is 0 or nothing
// remains. Precondition: lambda_t is finite.
ShiftInfo apply_shift(ScoreVector& scores, const GuidanceState& state, int t, ShiftTable& shifts, Rng& rng);

// Sets the EOS entry to -inf while guide words remain.
void suppress_eos(ScoreVector& scores, const GuidanceState& state, TokenId eos);

// Removes remaining words whose stem matches any word of `completed_text`
// and sets t_n = t if anything was removed. With fixed_order only the head
// word can be satisfied. Returns the indices removed.
std::vector<int> update_state(GuidanceState& state, std::string_view completed_text, int t);

// Tokens of the first remaining word, to be appended verbatim.
std::span<const TokenId> force_tokens(const GuidanceState& state);

}  // namespace k2t
