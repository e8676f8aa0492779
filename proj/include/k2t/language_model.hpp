#pragma once

#include <limits>
#include <span>
#include <vector>

#include "k2t/vocabulary.hpp"

namespace k2t {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-token log-domain scores for one decoding step.
struct ScoreVector {
  std::vector<double> values;
  int step_index = 0;

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

double logsumexp(std::span<const double> values);

// exp(values - logsumexp(values)); entries at -inf map to exactly 0.
std::vector<double> softmax(std::span<const double> values);

// Source of the base score log p(. | context). Implementations return
// normalized log-probabilities of length vocabulary().size().
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual const Vocabulary& vocabulary() const = 0;

  // `context` starts with BOS. Throws ProviderError on backend failure.
  virtual ScoreVector logprobs(std::span<const TokenId> context) = 0;
};

// Same distribution 1/|V| for every context.
class UniformModel final : public LanguageModel {
 public:
  explicit UniformModel(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  ScoreVector logprobs(std::span<const TokenId> context) override;

 private:
  Vocabulary vocab_;
};

}  // namespace k2t
