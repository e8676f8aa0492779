#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "k2t/language_model.hpp"

namespace k2t {

// Add-k smoothed n-gram model:
//   p(y | ctx) = (count(ctx, y) + k) / (count(ctx) + k |V|)
// where ctx is the last order-1 tokens, left-padded with BOS.
class NGramModel final : public LanguageModel {
 public:
  // Every sequence must start with BOS and end with EOS. Throws ContractError
  // on an empty corpus, order < 1 or k <= 0.
  static NGramModel train(std::span<const std::vector<TokenId>> corpus, Vocabulary vocab, int order,
                          double smoothing_k);

  const Vocabulary& vocabulary() const override { return vocab_; }
  ScoreVector logprobs(std::span<const TokenId> context) override;
  ScoreVector logprobs(std::span<const TokenId> context) const;

  double probability(std::span<const TokenId> context, TokenId next) const;

  int order() const { return order_; }
  double smoothing_k() const { return k_; }

  // Plain-text count dump; load(save(m)) gives identical log-probabilities.
  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);
  void save_file(const std::string& path) const;
  static NGramModel load_file(const std::string& path);

 private:
  struct ContextCounts {
    std::vector<std::pair<TokenId, std::uint32_t>> next;  // sorted by id
    std::uint64_t total = 0;
  };
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& key) const;
  };

  NGramModel(Vocabulary vocab, int order, double k) : vocab_(std::move(vocab)), order_(order), k_(k) {}
  std::vector<TokenId> context_key(std::span<const TokenId> context) const;

  Vocabulary vocab_;
  int order_ = 1;
  double k_ = 1.0;
  std::unordered_map<std::vector<TokenId>, ContextCounts, KeyHash> counts_;
};

// Reads one sentence per line, tokenized with the default word tokenizer.
std::vector<std::vector<std::string>> read_corpus(std::istream& in);
std::vector<std::vector<std::string>> read_corpus_file(const std::string& path);

}  // namespace k2t
