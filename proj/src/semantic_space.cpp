#include "k2t/semantic_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "k2t/error.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw LoadError("embedding dimensionality must be positive");
}

bool EmbeddingTable::insert(std::string_view word, std::span<const double> vec) {
  if (dim_ == 0) throw LoadError("embedding table has no dimensionality");
  if (vec.size() != dim_)
    throw LoadError("vector for '" + std::string(word) + "' has " + std::to_string(vec.size()) +
                    " components, expected " + std::to_string(dim_));
  std::string key = normalize_key(word);
  if (key.empty()) throw LoadError("empty embedding key");
  if (index_.contains(key)) return false;
  double sq = 0.0;
  for (double v : vec) sq += v * v;
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) throw LoadError("zero or non-finite vector for '" + key + "'");
  index_.emplace(key, words_.size());
  words_.push_back(std::move(key));
  data_.insert(data_.end(), vec.begin(), vec.end());
  norms_.push_back(n);
  return true;
}

std::optional<std::size_t> EmbeddingTable::index_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view key) const {
  auto idx = index_of(key);
  if (!idx) return std::nullopt;
  return std::span<const double>(data_.data() + *idx * dim_, dim_);
}

double EmbeddingTable::norm(std::string_view key) const {
  auto idx = index_of(key);
  if (!idx) throw UnmappedWordError(std::string(key));
  return norms_[*idx];
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool is_integer(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

EmbeddingTable load_embeddings(std::istream& in, const std::optional<std::unordered_set<std::string>>& vocab_filter) {
  EmbeddingTable table;
  std::optional<std::size_t> header_dim;
  std::string line;
  std::size_t line_no = 0;
  std::size_t parsed = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) {
      header_dim = static_cast<std::size_t>(std::stoull(std::string(fields[1])));
      continue;
    }
    if (fields.size() < 2) throw LoadError("line " + std::to_string(line_no) + ": no vector components");
    const std::size_t dim = fields.size() - 1;
    if (table.dim() == 0) {
      if (header_dim && *header_dim != dim)
        throw LoadError("line " + std::to_string(line_no) + ": dimensionality mismatch, header says " +
                        std::to_string(*header_dim) + " but line has " + std::to_string(dim));
      table = EmbeddingTable(dim);
    } else if (dim != table.dim()) {
      throw LoadError("line " + std::to_string(line_no) + ": dimensionality mismatch, expected " +
                      std::to_string(table.dim()) + " components but found " + std::to_string(dim));
    }
    vec.assign(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
      auto f = fields[c + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[c]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(vec[c]))
        throw LoadError("line " + std::to_string(line_no) + ": unparsable component '" + std::string(f) + "'");
    }
    ++parsed;
    const std::string key = normalize_key(fields[0]);
    if (vocab_filter && !vocab_filter->contains(key)) continue;
    try {
      if (!table.insert(key, vec)) {
        table.add_warning("line " + std::to_string(line_no) + ": duplicate word '" + key + "' ignored");
        spdlog::warn("embeddings: {}", table.warnings().back());
      }
    } catch (const LoadError& e) {
      throw LoadError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (parsed == 0) throw LoadError("embedding stream is empty");
  return table;
}

EmbeddingTable load_embeddings_file(const std::string& path,
                                    const std::optional<std::unordered_set<std::string>>& vocab_filter) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embedding file '" + path + "'");
  return load_embeddings(in, vocab_filter);
}

double cosine_similarity(const EmbeddingTable& table, std::string_view a, std::string_view b) {
  const std::string ka = normalize_key(a);
  const std::string kb = normalize_key(b);
  auto va = table.find(ka);
  if (!va) throw UnmappedWordError(ka);
  auto vb = table.find(kb);
  if (!vb) throw UnmappedWordError(kb);
  double dot = 0.0;
  for (std::size_t i = 0; i < table.dim(); ++i) dot += (*va)[i] * (*vb)[i];
  const double c = dot / (table.norm(ka) * table.norm(kb));
  return std::clamp(c, -1.0, 1.0);
}

double clipped_shift(const EmbeddingTable& table, std::string_view token_text, std::string_view guide) {
  const std::string key = normalize_key(token_text);
  if (!table.contains(key)) return 0.0;
  return std::max(0.0, cosine_similarity(table, key, guide));
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::fixed_order: return "order";
    case Strategy::closest: return "closest";
    case Strategy::all: return "all";
    case Strategy::random_pick: return "random";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "order" || name == "fixed_order") return Strategy::fixed_order;
  if (name == "closest") return Strategy::closest;
  if (name == "all") return Strategy::all;
  if (name == "random" || name == "random_pick") return Strategy::random_pick;
  throw ContractError("unknown strategy '" + std::string(name) + "'");
}

double strategy_shift(const EmbeddingTable& table, std::string_view token_text,
                      std::span<const std::string> remaining, Strategy strategy,
                      std::optional<std::string_view> picked) {
  if (remaining.empty()) throw ContractError("strategy_shift needs at least one remaining guide word");
  switch (strategy) {
    case Strategy::fixed_order:
      return clipped_shift(table, token_text, remaining.front());
    case Strategy::closest: {
      double best = 0.0;
      for (const auto& g : remaining) best = std::max(best, clipped_shift(table, token_text, g));
      return best;
    }
    case Strategy::all: {
      double sum = 0.0;
      for (const auto& g : remaining) sum += clipped_shift(table, token_text, g);
      return sum;
    }
    case Strategy::random_pick: {
      if (!picked || std::find(remaining.begin(), remaining.end(), *picked) == remaining.end())
        throw ContractError("random_pick needs a picked word from the remaining set");
      return clipped_shift(table, token_text, *picked);
    }
  }
  throw ContractError("unknown strategy");
}

}  // namespace k2t
