#include "k2t/textproc.hpp"

#include <array>
#include <cstdint>

namespace k2t {
namespace {

constexpr std::array<std::string_view, 2> kBuiltinMarkers = {"\xC4\xA0" /* Ġ */, "\xE2\x96\x81" /* ▁ */};

// Decodes one UTF-8 code point starting at text[i]; invalid bytes decode as
// themselves so that arbitrary input passes through unchanged.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
  const auto byte = [&](std::size_t at) { return static_cast<unsigned char>(text[at]); };
  const unsigned char c = byte(i);
  int extra = 0;
  char32_t cp = c;
  if (c >= 0xC0 && c < 0xE0) {
    extra = 1;
    cp = c & 0x1F;
  } else if (c >= 0xE0 && c < 0xF0) {
    extra = 2;
    cp = c & 0x0F;
  } else if (c >= 0xF0 && c < 0xF8) {
    extra = 3;
    cp = c & 0x07;
  }
  if (c >= 0x80 && extra == 0) {
    ++i;
    return c | 0x80000000u;  // stray continuation byte
  }
  if (extra > 0 && i + static_cast<std::size_t>(extra) >= text.size()) {
    ++i;
    return c | 0x80000000u;  // truncated sequence; keep the raw byte
  }
  for (int k = 1; k <= extra; ++k) {
    const unsigned char cc = byte(i + static_cast<std::size_t>(k));
    if ((cc & 0xC0) != 0x80) {
      ++i;
      return c | 0x80000000u;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp & 0x80000000u) {
    out.push_back(static_cast<char>(cp & 0xFF));
  } else if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t fold(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x100 && cp <= 0x137) return cp | 1u;
  if (cp >= 0x139 && cp <= 0x148) return (cp & 1u) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return cp | 1u;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp & 1u) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  return cp;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

// Word characters: ASCII letters and digits, plus every non-ASCII byte.
bool is_word_char(char c) { return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80; }


bool attaches_left(std::string_view tok) {
  if (tok.empty()) return false;
  if (tok == "." || tok == "," || tok == "!" || tok == "?" || tok == ";" || tok == ":" || tok == "%" ||
      tok == ")" || tok == "]" || tok == "}" || tok == "-")
    return true;
  return tok.size() > 1 && tok.front() == '\'';
}

bool attaches_right(std::string_view tok) {
  return tok == "(" || tok == "[" || tok == "{" || tok == "$" || tok == "-";
}

}  // namespace

std::string casefold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) encode_utf8(fold(decode_utf8(text, i)), out);
  return out;
}

std::size_t leading_marker_size(std::string_view token, std::string_view extra_marker) {
  for (auto m : kBuiltinMarkers)
    if (token.starts_with(m)) return m.size();
  if (!extra_marker.empty() && token.starts_with(extra_marker)) return extra_marker.size();
  return 0;
}

std::string normalize_key(std::string_view token, std::string_view extra_marker) {
  while (!token.empty() && is_space(token.front())) token.remove_prefix(1);
  while (!token.empty() && is_space(token.back())) token.remove_suffix(1);
  while (std::size_t n = leading_marker_size(token, extra_marker)) token.remove_prefix(n);
  while (!token.empty() && is_space(token.front())) token.remove_prefix(1);
  return casefold(token);
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  std::string folded;
  if (cfg.lowercase) {
    folded = casefold(text);
    text = folded;
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    if (!cfg.punctuation_split) {
      std::size_t j = i;
      while (j < n && !is_space(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    if (is_word_char(text[i])) {
      std::size_t j = i;
      while (j < n) {
        if (is_word_char(text[j])) {
          ++j;
        } else if ((text[j] == '.' || text[j] == ',') && j + 1 < n && is_ascii_digit(text[j + 1]) &&
                   is_ascii_digit(text[j - 1])) {
          ++j;  // 7.5 and 1,000 stay whole
        } else {
          break;
        }
      }
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    // Clitic: an apostrophe glued to the previous word and followed by letters.
    if (text[i] == '\'' && i > 0 && is_word_char(text[i - 1]) && i + 1 < n && is_word_char(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < n && is_word_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    out.emplace_back(text.substr(i, 1));
    ++i;
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool glue_next = true;
  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    if (!glue_next && !attaches_left(tok)) out.push_back(' ');
    out += tok;
    glue_next = attaches_right(tok);
  }
  return out;
}

bool is_word_token(std::string_view token) {
  for (char c : token)
    if (is_word_char(c)) return true;
  return false;
}

std::string stem(std::string_view word) {
  std::string current = porter_stem(casefold(word));
  // Porter is not idempotent on some inputs (because -> becaus -> becau).
  for (int guard = 0; guard < 16; ++guard) {
    std::string next = porter_stem(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

KeywordMatch contains_keyword(std::string_view text, std::string_view guide_stem) {
  KeywordMatch match;
  if (guide_stem.empty()) return match;
  std::size_t index = 0;
  for (const auto& tok : tokenize(text)) {
    if (!is_word_token(tok)) continue;
    if (stem(tok) == guide_stem) {
      match.found = true;
      match.word_index = index;
      return match;
    }
    ++index;
  }
  return match;
}

}  // namespace k2t
