#include "k2t/metrics.hpp"

#include <cmath>
#include <set>

#include "k2t/error.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

double perplexity(std::span<const TokenId> tokens, LanguageModel& eval_model, std::span<const TokenId> prefix) {
  if (tokens.empty()) throw ContractError("perplexity of an empty sequence");
  std::vector<TokenId> context(prefix.begin(), prefix.end());
  if (context.empty()) context.push_back(eval_model.vocabulary().bos());
  // running mean: a constant sequence keeps its value bit for bit
  double mean = 0.0;
  std::size_t k = 0;
  for (TokenId tok : tokens) {
    const double lp = eval_model.logprobs(context).values.at(static_cast<std::size_t>(tok));
    if (!std::isfinite(lp)) throw ContractError("token has zero probability under the evaluation model");
    mean += (lp - mean) / static_cast<double>(++k);
    context.push_back(tok);
  }
  return std::exp(-mean);
}

double perplexity(std::span<const TokenId> tokens, LanguageModel& eval_model) {
  return perplexity(tokens, eval_model, {});
}

double repetition_4gram(std::span<const std::string> w) {
  if (w.size() < 4) return 0.0;
  std::set<std::vector<std::string>> distinct;
  const std::size_t total = w.size() - 3;
  for (std::size_t i = 0; i < total; ++i) distinct.insert(std::vector<std::string>(w.begin() + i, w.begin() + i + 4));
  return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double success_rate(std::span<const std::string> texts, std::span<const std::vector<std::string>> keyword_sets) {
  if (texts.size() != keyword_sets.size()) throw ContractError("one keyword set per text is required");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (const auto& kw : keyword_sets[i]) {
      ++total;
      if (contains_keyword(texts[i], stem(kw)).found) ++hit;
    }
  }
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

double success_rate(std::span<const GenerationResult> results,
                    std::span<const std::vector<std::string>> keyword_sets) {
  std::vector<std::string> texts;
  texts.reserve(results.size());
  for (const auto& r : results) texts.push_back(r.text);
  return success_rate(texts, keyword_sets);
}

Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw ContractError("aggregate of no values");
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  s.std_defined = true;
  return s;
}

}  // namespace k2t
