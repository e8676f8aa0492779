#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace k2t {

using TokenId = std::int32_t;

// Dense token inventory of a language model. Ids are [0, size()); token
// strings are unique; bos != eos.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, TokenId bos, TokenId eos);

  std::size_t size() const { return tokens_.size(); }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<TokenId> find(std::string_view token) const;
  std::optional<TokenId> unk() const { return unk_; }

  // Set when tokens are subword pieces whose word-initial pieces carry a
  // leading space marker (detected from the token strings).
  const std::optional<std::string>& subword_marker() const { return marker_; }
  bool word_level() const { return !marker_.has_value(); }

  // True if `id` begins a new word (always true for word-level vocabularies).
  bool starts_word(TokenId id) const;

  // Surface text of a token sequence; BOS and EOS are dropped.
  std::string decode(std::span<const TokenId> ids) const;

  // Word-level: tokenizes and maps each word, falling back to <unk>.
  // Subword: greedy longest match per whitespace-separated word.
  // Throws ContractError if some piece cannot be encoded.
  std::vector<TokenId> encode(std::string_view text, bool word_initial = true) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && bos_ == other.bos_ && eos_ == other.eos_;
  }

 private:
  std::vector<TokenId> encode_subword(std::string_view word) const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId bos_ = 0;
  TokenId eos_ = 1;
  std::optional<TokenId> unk_;
  std::optional<std::string> marker_;
  std::size_t longest_token_ = 0;
};

inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

// <s>, </s>, <unk>, then the distinct words in sorted order.
Vocabulary make_word_vocabulary(std::span<const std::vector<std::string>> sentences,
                                std::span<const std::string> extra_words = {});

// BOS + ids of `words` + EOS.
std::vector<TokenId> encode_sentence(const Vocabulary& vocab, std::span<const std::string> words);

}  // namespace k2t
