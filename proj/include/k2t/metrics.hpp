#pragma once

#include <span>
#include <string>
#include <vector>

#include "k2t/decoding.hpp"
#include "k2t/language_model.hpp"

namespace k2t {

// exp(-mean log p(y_t | prefix)) over `tokens`, each conditioned on `prefix`
// plus the tokens before it. prefix must start with BOS. Throws ContractError
// on an empty sequence or a zero-probability token.
double perplexity(std::span<const TokenId> tokens, LanguageModel& eval_model,
                  std::span<const TokenId> prefix);
double perplexity(std::span<const TokenId> tokens, LanguageModel& eval_model);

// 1 - distinct/total over sliding 4-grams; 0 with fewer than 4 tokens.
double repetition_4gram(std::span<const std::string> word_tokens);

// Percentage of keywords (over all texts) whose stem occurs in their text.
// Throws ContractError when the lists differ in length.
double success_rate(std::span<const std::string> texts, std::span<const std::vector<std::string>> keyword_sets);
double success_rate(std::span<const GenerationResult> results,
                    std::span<const std::vector<std::string>> keyword_sets);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;       // sample (n - 1) standard deviation
  bool std_defined = false;  // false for a single value (stddev reported as 0)
};

// Throws ContractError on empty input.
Summary aggregate(std::span<const double> values);

}  // namespace k2t
