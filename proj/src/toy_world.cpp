#include "k2t/toy_world.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>

#include "k2t/error.hpp"
#include "k2t/rng.hpp"
#include "k2t/textproc.hpp"

namespace k2t {
namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<double> gaussian(int dim, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = rng.normal();
  return v;
}

struct StemGroup {
  std::vector<std::string> base;      // words from the list
  std::vector<std::string> variants;  // generated inflections
  int topic = 0;
};

}  // namespace

ToyWorld build_toy_world(std::span<const std::string> word_list, const std::unordered_set<std::string>& stopwords,
                         const ToyWorldOptions& o) {
  if (word_list.size() < 1000) throw ContractError("toy world needs a word list of at least 1000 entries");
  if (o.topics < 1 || o.dim < 2 || o.min_len < 1 || o.max_len < o.min_len)
    throw ContractError("invalid toy world options");
  ToyWorld w;
  w.word_list.assign(word_list.begin(), word_list.end());
  w.stopwords = stopwords;
  Rng rng(o.seed);

  const std::unordered_set<std::string> listed(word_list.begin(), word_list.end());
  std::vector<std::string> function_words;
  std::map<std::string, StemGroup> groups;
  for (std::size_t i = 0; i < word_list.size(); ++i) {
    const auto& word = word_list[i];
    if (i < 500 || stopwords.contains(word)) {
      function_words.push_back(word);
      continue;
    }
    auto& g = groups[stem(word)];
    g.base.push_back(word);
    const std::string plural = word + "s";
    if (word.back() != 's' && !listed.contains(plural) && stem(plural) == stem(word)) g.variants.push_back(plural);
  }

  std::vector<std::vector<const StemGroup*>> by_topic(static_cast<std::size_t>(o.topics));
  for (auto& [s, g] : groups) {
    g.topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(o.topics)));
    by_topic[static_cast<std::size_t>(g.topic)].push_back(&g);
  }
  for (auto& members : by_topic) shuffle(members, rng);

  // Semantic space.
  w.table = EmbeddingTable(static_cast<std::size_t>(o.dim));
  // Topics sit on a ring: each centre shares half of its neighbours' raw
  // directions, so adjacent topics are similar and distant ones are not.
  std::vector<std::vector<double>> raw, centers;
  for (int z = 0; z < o.topics; ++z) raw.push_back(gaussian(o.dim, rng));
  for (int z = 0; z < o.topics; ++z) {
    const auto& prev = raw[static_cast<std::size_t>((z + o.topics - 1) % o.topics)];
    const auto& next = raw[static_cast<std::size_t>((z + 1) % o.topics)];
    std::vector<double> c(static_cast<std::size_t>(o.dim));
    for (std::size_t d = 0; d < c.size(); ++d)
      c[d] = (raw[static_cast<std::size_t>(z)][d] + 0.5 * (prev[d] + next[d])) / std::sqrt(1.5);
    centers.push_back(std::move(c));
  }
  const auto function_center = gaussian(o.dim, rng);
  for (const auto& fw : function_words) {
    auto v = gaussian(o.dim, rng);
    for (int d = 0; d < o.dim; ++d) v[static_cast<std::size_t>(d)] += 2.0 * function_center[static_cast<std::size_t>(d)];
    w.table.insert(fw, v);
  }
  for (const auto& [s, g] : groups) {
    const auto stem_vec = gaussian(o.dim, rng);
    const auto& center = centers[static_cast<std::size_t>(g.topic)];
    auto add = [&](const std::string& word) {
      auto noise = gaussian(o.dim, rng);
      std::vector<double> v(static_cast<std::size_t>(o.dim));
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = o.topic_weight * center[d] + 0.6 * stem_vec[d] + 0.25 * noise[d];
      w.table.insert(word, v);
    };
    for (const auto& b : g.base) add(b);
    for (const auto& v : g.variants) add(v);
  }

  // Corpora: a first-order walk over topics. A sentence starts on a function
  // word; every word leads to function words or content words of its own
  // topic, or of an adjacent one on the ring. Each function word belongs to
  // one topic as far as the walk is concerned.
  std::vector<std::vector<std::string>> topic_content(static_cast<std::size_t>(o.topics));
  std::vector<std::vector<std::string>> topic_function(static_cast<std::size_t>(o.topics));
  for (const auto& members : by_topic)
    for (const StemGroup* g : members) {
      auto& dst = topic_content[static_cast<std::size_t>(g->topic)];
      dst.insert(dst.end(), g->base.begin(), g->base.end());
      dst.insert(dst.end(), g->variants.begin(), g->variants.end());
    }
  for (const auto& fw : function_words)
    topic_function[rng.below(static_cast<std::uint64_t>(o.topics))].push_back(fw);
  auto pick = [&](const std::vector<std::string>& pool) -> const std::string* {
    return pool.empty() ? nullptr : &pool[rng.below(pool.size())];
  };
  auto sentence = [&]() {
    std::vector<std::string> out;
    const int len = o.min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_len - o.min_len + 1)));
    int z = static_cast<int>(rng.below(static_cast<std::uint64_t>(o.topics)));
    const std::string* first = nullptr;
    while (!(first = pick(topic_function[static_cast<std::size_t>(z)])))
      z = static_cast<int>(rng.below(static_cast<std::uint64_t>(o.topics)));
    out.push_back(*first);
    while (static_cast<int>(out.size()) < len) {
      if (rng.uniform() >= o.topic_stickiness) z = (z + (rng.uniform() < 0.5 ? o.topics - 1 : 1)) % o.topics;
      const bool function = rng.uniform() < o.function_word_rate;
      const auto& pool = function ? topic_function[static_cast<std::size_t>(z)] : topic_content[static_cast<std::size_t>(z)];
      const std::string* next = pick(pool);
      if (next && *next != out.back()) out.push_back(*next);
    }
    return out;
  };
  for (int i = 0; i < o.train_sentences; ++i) w.train_corpus.push_back(sentence());
  for (int i = 0; i < o.eval_sentences; ++i) w.eval_corpus.push_back(sentence());

  w.vocab = make_word_vocabulary({}, w.table.words());
  for (const auto& s : w.train_corpus) w.train_ids.push_back(encode_sentence(w.vocab, s));
  for (const auto& s : w.eval_corpus) w.eval_ids.push_back(encode_sentence(w.vocab, s));
  return w;
}

NGramModel toy_generation_model(const ToyWorld& world, const ToyWorldOptions& options) {
  return NGramModel::train(world.train_ids, world.vocab, 2, options.smoothing_k);
}

NGramModel toy_evaluation_model(const ToyWorld& world, const ToyWorldOptions& options) {
  return NGramModel::train(world.eval_ids, world.vocab, 2, options.eval_smoothing_k);
}

void write_toy_world(const ToyWorld& world, const std::string& dir, const ToyWorldOptions& options) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "embeddings.txt");
    out << std::setprecision(9);
    for (const auto& word : world.table.words()) {
      out << word;
      const auto vec = *world.table.find(word);
      for (double x : vec) out << ' ' << x;
      out << '\n';
    }
  }
  auto write_corpus = [&](const std::string& name, const auto& corpus) {
    std::ofstream out(fs::path(dir) / name);
    for (const auto& s : corpus) out << detokenize(s) << '\n';
  };
  write_corpus("corpus.txt", world.train_corpus);
  write_corpus("eval_corpus.txt", world.eval_corpus);
  toy_generation_model(world, options).save_file((fs::path(dir) / "gen.lm").string());
  toy_evaluation_model(world, options).save_file((fs::path(dir) / "eval.lm").string());
}

}  // namespace k2t
