#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace k2t {

struct TokenizerConfig {
  bool lowercase = true;
  bool punctuation_split = true;
  // Leading marker that a subword vocabulary uses for "starts a new word"
  // (e.g. "Ġ" for byte-level BPE, "▁" for sentencepiece).
  std::optional<std::string> subword_space_marker;
};

// Simple Unicode case folding for Latin, Greek and Cyrillic letters.
std::string casefold(std::string_view text);

// Embedding lookup key for a word or LM token: surrounding whitespace and
// leading subword-space markers removed, then case-folded.
std::string normalize_key(std::string_view token, std::string_view extra_marker = {});

// Returns the number of bytes of a leading subword-space marker, 0 if none.
std::size_t leading_marker_size(std::string_view token, std::string_view extra_marker = {});

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg = {});
std::string detokenize(std::span<const std::string> tokens);

// True if the token carries at least one letter or digit.
bool is_word_token(std::string_view token);

// The classic Porter (1980) suffix stripper, as in the reference C release.
// Expects lowercase input; words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

// Stem used for occurrence matching: case-folded, then Porter-stemmed until a
// fixed point so that stem(stem(w)) == stem(w).
std::string stem(std::string_view word);

struct KeywordMatch {
  bool found = false;
  std::size_t word_index = 0;  // index among word tokens of the text
};

// Earliest word of `text` whose stem equals `guide_stem`.
KeywordMatch contains_keyword(std::string_view text, std::string_view guide_stem);

}  // namespace k2t
