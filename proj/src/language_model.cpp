#include "k2t/language_model.hpp"

#include <algorithm>
#include <cmath>

namespace k2t {

double logsumexp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

std::vector<double> softmax(std::span<const double> values) {
  const double lse = logsumexp(values);
  std::vector<double> out(values.size(), 0.0);
  if (lse == kNegInf) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = values[i] == kNegInf ? 0.0 : std::exp(values[i] - lse);
  return out;
}

ScoreVector UniformModel::logprobs(std::span<const TokenId> context) {
  ScoreVector sv;
  sv.values.assign(vocab_.size(), -std::log(static_cast<double>(vocab_.size())));
  sv.step_index = static_cast<int>(context.size());
  return sv;
}

}  // namespace k2t
