#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "k2t/language_model.hpp"
#include "k2t/semantic_space.hpp"
#include "k2t/toy_world.hpp"
#include "k2t/vocabulary.hpp"

namespace k2t::test {

// <s>, </s>, then `words` in the given order.
inline Vocabulary vocab_of(std::vector<std::string> words) {
  std::vector<std::string> tokens = {std::string(kBosToken), std::string(kEosToken)};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary(std::move(tokens), 0, 1);
}

inline EmbeddingTable table_of(std::initializer_list<std::pair<std::string, std::vector<double>>> rows) {
  EmbeddingTable t(rows.begin()->second.size());
  for (const auto& [w, v] : rows) t.insert(w, v);
  return t;
}

// Log-probabilities computed by a callback; counts calls.
class FunctionModel final : public LanguageModel {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId>)>;
  FunctionModel(Vocabulary vocab, Fn fn) : vocab_(std::move(vocab)), fn_(std::move(fn)) {}
  const Vocabulary& vocabulary() const override { return vocab_; }
  ScoreVector logprobs(std::span<const TokenId> context) override {
    ++calls;
    ScoreVector sv;
    sv.values = fn_(context);
    sv.step_index = static_cast<int>(context.size());
    return sv;
  }
  int calls = 0;

 private:
  Vocabulary vocab_;
  Fn fn_;
};

// Shared small toy world (built once per process).
const ToyWorld& small_world();
ToyWorldOptions small_world_options();

}  // namespace k2t::test
