#include "k2t/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "k2t/error.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId bos, TokenId eos) : tokens_(std::move(tokens)) {
  const auto n = static_cast<TokenId>(tokens_.size());
  if (n < 2) throw ContractError("vocabulary needs at least BOS and EOS");
  if (bos < 0 || bos >= n || eos < 0 || eos >= n) throw ContractError("BOS/EOS id out of range");
  if (bos == eos) throw ContractError("BOS and EOS must be distinct tokens");
  bos_ = bos;
  eos_ = eos;
  index_.reserve(tokens_.size());
  std::size_t marked = 0;
  std::string marker;
  for (TokenId i = 0; i < n; ++i) {
    const auto& tok = tokens_[static_cast<std::size_t>(i)];
    if (!index_.emplace(tok, i).second) throw ContractError("duplicate token '" + tok + "' in vocabulary");
    longest_token_ = std::max(longest_token_, tok.size());
    if (std::size_t m = leading_marker_size(tok); m > 0) {
      ++marked;
      if (marker.empty()) marker = tok.substr(0, m);
    }
  }
  if (marked > 0) marker_ = marker;
  if (auto it = index_.find(std::string(kUnkToken)); it != index_.end()) unk_ = it->second;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::starts_word(TokenId id) const {
  if (!marker_) return true;
  return token(id).starts_with(*marker_);
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  if (!marker_) {
    std::vector<std::string> words;
    words.reserve(ids.size());
    for (TokenId id : ids)
      if (id != bos_ && id != eos_) words.push_back(token(id));
    return detokenize(words);
  }
  std::string out;
  for (TokenId id : ids) {
    if (id == bos_ || id == eos_) continue;
    const auto& tok = token(id);
    if (tok.starts_with(*marker_)) {
      out.push_back(' ');
      out.append(tok, marker_->size());
    } else {
      out += tok;
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

std::vector<TokenId> Vocabulary::encode_subword(std::string_view word) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t len = std::min(longest_token_, word.size() - i);
    for (; len > 0; --len)
      if (auto id = find(word.substr(i, len))) {
        ids.push_back(*id);
        break;
      }
    if (len == 0) throw ContractError("cannot encode '" + std::string(word) + "' with this vocabulary");
    i += len;
  }
  return ids;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text, bool word_initial) const {
  std::vector<TokenId> ids;
  if (!marker_) {
    for (const auto& w : tokenize(text)) {
      if (auto id = find(w)) {
        ids.push_back(*id);
      } else if (unk_) {
        ids.push_back(*unk_);
      } else {
        throw ContractError("word '" + w + "' is not in the vocabulary");
      }
    }
    return ids;
  }
  TokenizerConfig cfg;
  cfg.lowercase = false;
  cfg.punctuation_split = false;
  bool first = true;
  for (const auto& chunk : tokenize(text, cfg)) {
    const bool marked = word_initial || !first;
    auto piece = encode_subword(marked ? *marker_ + chunk : chunk);
    ids.insert(ids.end(), piece.begin(), piece.end());
    first = false;
  }
  return ids;
}

Vocabulary make_word_vocabulary(std::span<const std::vector<std::string>> sentences,
                                std::span<const std::string> extra_words) {
  std::set<std::string> words(extra_words.begin(), extra_words.end());
  for (const auto& s : sentences) words.insert(s.begin(), s.end());
  words.erase(std::string(kBosToken));
  words.erase(std::string(kEosToken));
  words.erase(std::string(kUnkToken));
  std::vector<std::string> tokens = {std::string(kBosToken), std::string(kEosToken), std::string(kUnkToken)};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary(std::move(tokens), 0, 1);
}

std::vector<TokenId> encode_sentence(const Vocabulary& vocab, std::span<const std::string> words) {
  std::vector<TokenId> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(vocab.bos());
  for (const auto& w : words) {
    auto id = vocab.find(w);
    if (!id) id = vocab.unk();
    if (!id) throw ContractError("word '" + w + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  ids.push_back(vocab.eos());
  return ids;
}

}  // namespace k2t
