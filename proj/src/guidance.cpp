#include "k2t/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "k2t/error.hpp"

namespace k2t {

GuideWord make_guide_word(std::string_view surface, const Vocabulary& vocab, const EmbeddingTable& table) {
  GuideWord g;
  g.surface = std::string(surface);
  g.embedding_key = normalize_key(surface);
  if (g.embedding_key.empty()) throw ContractError("empty guide word");
  g.stem = stem(g.embedding_key);
  if (g.stem.empty()) throw ContractError("guide word '" + g.surface + "' has an empty stem");
  if (!table.contains(g.embedding_key)) throw UnmappedWordError(g.embedding_key);
  if (vocab.word_level()) {
    auto id = vocab.find(g.embedding_key);
    if (!id) throw ContractError("guide word '" + g.surface + "' is not in the model vocabulary");
    g.token_ids = {*id};
  } else {
    g.token_ids = vocab.encode(g.embedding_key, true);
  }
  if (g.token_ids.empty()) throw ContractError("guide word '" + g.surface + "' encodes to no tokens");
  if (!contains_keyword(vocab.decode(g.token_ids), g).found)
    throw ContractError("guide word '" + g.surface + "' does not survive tokenization");
  return g;
}

std::vector<GuideWord> make_guide_words(std::span<const std::string> surfaces, const Vocabulary& vocab,
                                        const EmbeddingTable& table) {
  std::vector<GuideWord> out;
  out.reserve(surfaces.size());
  for (const auto& s : surfaces) out.push_back(make_guide_word(s, vocab, table));
  return out;
}

KeywordMatch contains_keyword(std::string_view text, const GuideWord& guide) {
  return contains_keyword(text, guide.stem);
}

int GuidanceState::reserved_tokens() const {
  int n = 0;
  for (int idx : remaining) n += static_cast<int>(word(idx).token_ids.size());
  return n;
}

GuidanceState make_guidance_state(std::vector<GuideWord> words, const GuidanceParams& params) {
  if (!(params.lambda0 >= 0.0)) throw ContractError("lambda0 must be >= 0");
  if (params.annealing && !(params.growth_c > 0.0)) throw ContractError("growth constant c must be > 0");
  if (params.max_len < 1) throw ContractError("max_len must be >= 1");
  GuidanceState s;
  s.params = params;
  s.remaining.resize(words.size());
  std::iota(s.remaining.begin(), s.remaining.end(), 0);
  s.words = std::make_shared<const std::vector<GuideWord>>(std::move(words));
  if (params.annealing && s.reserved_tokens() > params.max_len)
    throw BudgetError("guide words need " + std::to_string(s.reserved_tokens()) +
                      " tokens but the generation budget is " + std::to_string(params.max_len));
  return s;
}

double current_lambda(const GuidanceState& state, int t) {
  const auto& p = state.params;
  if (!p.annealing) return p.lambda0;
  const int t_n = state.last_satisfied_step;
  const int boundary = p.max_len - state.reserved_tokens();
  if (t >= boundary) return kForceLambda;
  const int span = boundary - t_n;
  if (span <= 0 || t < t_n) throw ContractError("degenerate annealing budget");
  return p.lambda0 * std::exp(p.growth_c * static_cast<double>(t - t_n) / static_cast<double>(span));
}

ShiftTable::ShiftTable(const EmbeddingTable& table, const Vocabulary& vocab, SimilarityMode mode)
    : table_(table), mode_(mode) {
  const std::string marker = vocab.subword_marker().value_or("");
  token_keys_.reserve(vocab.size());
  token_vecs_.reserve(vocab.size());
  token_norms_.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    std::string key = (id == vocab.bos() || id == vocab.eos()) ? std::string() : normalize_key(vocab.token(id), marker);
    auto vec = key.empty() ? std::nullopt : table.find(key);
    token_norms_.push_back(vec ? table.norm(key) : 0.0);
    token_vecs_.push_back(vec);
    token_keys_.push_back(std::move(key));
  }
}

std::span<const double> ShiftTable::guide_row(const GuideWord& guide) {
  auto it = rows_.find(guide.embedding_key);
  if (it != rows_.end()) return it->second;
  std::vector<double> row(token_keys_.size(), 0.0);
  if (mode_ == SimilarityMode::exact) {
    for (std::size_t i = 0; i < row.size(); ++i)
      if (!token_keys_[i].empty() && token_keys_[i] == guide.embedding_key) row[i] = 1.0;
  } else {
    auto gv = table_.find(guide.embedding_key);
    if (!gv) throw UnmappedWordError(guide.embedding_key);
    const double gn = table_.norm(guide.embedding_key);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!token_vecs_[i]) continue;
      const auto& tv = *token_vecs_[i];
      double dot = 0.0;
      for (std::size_t d = 0; d < tv.size(); ++d) dot += tv[d] * (*gv)[d];
      row[i] = std::max(0.0, std::clamp(dot / (token_norms_[i] * gn), -1.0, 1.0));
    }
  }
  return rows_.emplace(guide.embedding_key, std::move(row)).first->second;
}

std::span<const double> ShiftTable::shifts(const GuidanceState& state, std::optional<int> picked) {
  if (state.remaining.empty()) throw ContractError("no remaining guide words to shift towards");
  std::vector<int> key;
  const Strategy strategy = state.params.strategy;
  switch (strategy) {
    case Strategy::fixed_order: key = {state.remaining.front()}; break;
    case Strategy::random_pick:
      if (!picked || std::find(state.remaining.begin(), state.remaining.end(), *picked) == state.remaining.end())
        throw ContractError("random_pick needs a picked word from the remaining set");
      key = {*picked};
      break;
    case Strategy::closest:
    case Strategy::all:
      key = state.remaining;
      key.push_back(strategy == Strategy::all ? -2 : -1);  // distinguishes the reductions
      break;
  }
  if (key.size() == 1) return guide_row(state.word(key.front()));
  if (auto it = combined_.find(key); it != combined_.end()) return it->second;
  std::vector<double> out(token_keys_.size(), 0.0);
  for (int idx : state.remaining) {
    auto row = guide_row(state.word(idx));
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = strategy == Strategy::all ? out[i] + row[i] : std::max(out[i], row[i]);
  }
  return combined_.emplace(std::move(key), std::move(out)).first->second;
}

ShiftInfo apply_shift(ScoreVector& scores, const GuidanceState& state, int t, ShiftTable& shifts, Rng& rng) {
  ShiftInfo info;
  if (state.remaining.empty()) return info;
  info.lambda = current_lambda(state, t);
  if (!std::isfinite(info.lambda)) throw ContractError("apply_shift called in the forcing phase");
  if (info.lambda == 0.0) return info;
  if (state.params.strategy == Strategy::random_pick)
    info.picked = state.remaining[static_cast<std::size_t>(rng.below(state.remaining.size()))];
  auto row = shifts.shifts(state, info.picked);
  if (row.size() != scores.size()) throw ContractError("score vector and shift table sizes differ");
  for (std::size_t i = 0; i < row.size(); ++i)
    if (row[i] != 0.0) scores.values[i] += info.lambda * row[i];
  return info;
}

void suppress_eos(ScoreVector& scores, const GuidanceState& state, TokenId eos) {
  if (!state.remaining.empty()) scores.values.at(static_cast<std::size_t>(eos)) = kNegInf;
}

std::vector<int> update_state(GuidanceState& state, std::string_view completed_text, int t) {
  std::vector<int> removed;
  if (state.remaining.empty()) return removed;
  std::vector<std::string> stems;
  for (const auto& tok : tokenize(completed_text))
    if (is_word_token(tok)) stems.push_back(stem(tok));
  if (stems.empty()) return removed;
  auto matches = [&](int idx) {
    return std::find(stems.begin(), stems.end(), state.word(idx).stem) != stems.end();
  };
  if (state.params.strategy == Strategy::fixed_order) {
    if (matches(state.remaining.front())) {
      removed.push_back(state.remaining.front());
      state.remaining.erase(state.remaining.begin());
    }
  } else {
    for (auto it = state.remaining.begin(); it != state.remaining.end();) {
      if (matches(*it)) {
        removed.push_back(*it);
        it = state.remaining.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (!removed.empty()) state.last_satisfied_step = std::max(state.last_satisfied_step, t);
  return removed;
}

std::span<const TokenId> force_tokens(const GuidanceState& state) {
  if (state.remaining.empty()) throw ContractError("nothing left to force");
  return state.word(state.remaining.front()).token_ids;
}

}  // namespace k2t
