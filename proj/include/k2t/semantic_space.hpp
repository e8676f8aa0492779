#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace k2t {

// Word -> vector map defining the semantic space. Keys are normalized with
// normalize_key(); every vector has the same dimensionality and a positive
// norm. Immutable once loaded, so it can be shared across generations.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim);

  // Adds an entry. Returns false (and leaves the table unchanged) if the
  // normalized word is already present. Throws LoadError on a wrong-sized or
  // zero vector.
  bool insert(std::string_view word, std::span<const double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  // Lookup of an already-normalized key.
  std::optional<std::span<const double>> find(std::string_view key) const;
  bool contains(std::string_view key) const { return index_.contains(std::string(key)); }
  double norm(std::string_view key) const;

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::optional<std::size_t> index_of(std::string_view key) const;

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;  // row-major, size() x dim()
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

// Parses "word c1 ... cd" lines. A first line made of exactly two integers is
// treated as a "count dim" header. Duplicates keep their first occurrence and
// add a warning. Throws LoadError on empty input, ragged dimensionality or an
// unparsable component.
EmbeddingTable load_embeddings(std::istream& in,
                               const std::optional<std::unordered_set<std::string>>& vocab_filter = {});
EmbeddingTable load_embeddings_file(const std::string& path,
                                    const std::optional<std::unordered_set<std::string>>& vocab_filter = {});

// Cosine of the angle between two mapped words, clamped to [-1, 1]. Throws
// UnmappedWordError when either word is missing.
double cosine_similarity(const EmbeddingTable& table, std::string_view a, std::string_view b);

// max(0, cos(token, guide)); exactly 0 when the token has no embedding.
double clipped_shift(const EmbeddingTable& table, std::string_view token_text, std::string_view guide);

enum class Strategy { fixed_order, closest, all, random_pick };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

// Shift of one candidate token under a guidance strategy.
//   fixed_order  clipped shift against remaining[0]
//   closest      max over remaining
//   all          sum over remaining, each term clipped at 0
//   random_pick  clipped shift against `picked`, which must be in remaining
double strategy_shift(const EmbeddingTable& table, std::string_view token_text,
                      std::span<const std::string> remaining, Strategy strategy,
                      std::optional<std::string_view> picked = std::nullopt);

}  // namespace k2t
