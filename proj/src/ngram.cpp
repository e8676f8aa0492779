#include "k2t/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "k2t/error.hpp"
#include "k2t/textproc.hpp"

namespace k2t {

namespace {
constexpr std::string_view kMagic = "k2t-ngram";
constexpr int kFormatVersion = 1;
}  // namespace

std::size_t NGramModel::KeyHash::operator()(const std::vector<TokenId>& key) const {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (TokenId id : key) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(id));
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<TokenId> NGramModel::context_key(std::span<const TokenId> context) const {
  const auto n = static_cast<std::size_t>(order_ - 1);
  std::vector<TokenId> key(n, vocab_.bos());
  const std::size_t take = std::min(n, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            key.end() - static_cast<std::ptrdiff_t>(take));
  return key;
}

NGramModel NGramModel::train(std::span<const std::vector<TokenId>> corpus, Vocabulary vocab, int order,
                             double smoothing_k) {
  if (order < 1) throw ContractError("n-gram order must be >= 1");
  if (corpus.empty()) throw ContractError("cannot train on an empty corpus");
  if (!(smoothing_k > 0.0)) throw ContractError("add-k smoothing constant must be positive");
  NGramModel model(std::move(vocab), order, smoothing_k);
  const auto v = static_cast<TokenId>(model.vocab_.size());
  std::unordered_map<std::vector<TokenId>, std::map<TokenId, std::uint32_t>, KeyHash> raw;
  for (const auto& seq : corpus) {
    if (seq.size() < 2 || seq.front() != model.vocab_.bos() || seq.back() != model.vocab_.eos())
      throw ContractError("every training sequence must start with BOS and end with EOS");
    for (std::size_t i = 1; i < seq.size(); ++i) {
      if (seq[i] < 0 || seq[i] >= v) throw ContractError("token id out of vocabulary range");
      auto key = model.context_key(std::span<const TokenId>(seq.data(), i));
      ++raw[std::move(key)][seq[i]];
    }
  }
  for (auto& [key, table] : raw) {
    ContextCounts cc;
    cc.next.assign(table.begin(), table.end());
    for (const auto& [id, c] : cc.next) cc.total += c;
    model.counts_.emplace(key, std::move(cc));
  }
  return model;
}

ScoreVector NGramModel::logprobs(std::span<const TokenId> context) {
  return std::as_const(*this).logprobs(context);
}

ScoreVector NGramModel::logprobs(std::span<const TokenId> context) const {
  const double kv = k_ * static_cast<double>(vocab_.size());
  ScoreVector sv;
  sv.step_index = static_cast<int>(context.size());
  auto it = counts_.find(context_key(context));
  if (it == counts_.end()) {
    sv.values.assign(vocab_.size(), std::log(k_ / kv));
    return sv;
  }
  const double denom = static_cast<double>(it->second.total) + kv;
  sv.values.assign(vocab_.size(), std::log(k_ / denom));
  for (const auto& [id, c] : it->second.next)
    sv.values[static_cast<std::size_t>(id)] = std::log((static_cast<double>(c) + k_) / denom);
  return sv;
}

double NGramModel::probability(std::span<const TokenId> context, TokenId next) const {
  const double kv = k_ * static_cast<double>(vocab_.size());
  auto it = counts_.find(context_key(context));
  if (it == counts_.end()) return k_ / kv;
  const auto& nx = it->second.next;
  auto pos = std::lower_bound(nx.begin(), nx.end(), next,
                              [](const auto& entry, TokenId id) { return entry.first < id; });
  const double c = (pos != nx.end() && pos->first == next) ? pos->second : 0.0;
  return (c + k_) / (static_cast<double>(it->second.total) + kv);
}

void NGramModel::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "order " << order_ << '\n';
  out << "smoothing " << std::hexfloat << k_ << std::defaultfloat << '\n';
  out << "vocab " << vocab_.size() << " bos " << vocab_.bos() << " eos " << vocab_.eos() << '\n';
  for (const auto& tok : vocab_.tokens()) out << tok << '\n';
  // Sorted context order keeps the dump byte-stable.
  std::vector<const std::vector<TokenId>*> keys;
  keys.reserve(counts_.size());
  for (const auto& [key, cc] : counts_) keys.push_back(&key);
  std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
  out << "contexts " << keys.size() << '\n';
  for (auto* key : keys) {
    const auto& cc = counts_.at(*key);
    for (TokenId id : *key) out << id << ' ';
    out << cc.next.size();
    for (const auto& [id, c] : cc.next) out << ' ' << id << ':' << c;
    out << '\n';
  }
}

NGramModel NGramModel::load(std::istream& in) {
  auto fail = [](const std::string& what) { return LoadError("n-gram model: " + what); };
  std::string magic, word;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw fail("not a k2t n-gram dump");
  if (version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
  int order = 0;
  std::string k_text;
  std::size_t vsize = 0;
  TokenId bos = 0, eos = 0;
  std::string w2, w3;
  if (!(in >> word >> order) || word != "order" || order < 1) throw fail("bad order line");
  if (!(in >> word >> k_text) || word != "smoothing") throw fail("bad smoothing line");
  const double k = std::strtod(k_text.c_str(), nullptr);
  if (!(k > 0.0)) throw fail("bad smoothing constant");
  if (!(in >> word >> vsize >> w2 >> bos >> w3 >> eos) || word != "vocab" || w2 != "bos" || w3 != "eos")
    throw fail("bad vocab line");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> tokens;
  tokens.reserve(vsize);
  for (std::size_t i = 0; i < vsize; ++i) {
    if (!std::getline(in, line)) throw fail("truncated vocabulary");
    tokens.push_back(line);
  }
  NGramModel model(Vocabulary(std::move(tokens), bos, eos), order, k);
  std::size_t ncontexts = 0;
  if (!(in >> word >> ncontexts) || word != "contexts") throw fail("bad contexts line");
  std::getline(in, line);
  const auto v = static_cast<TokenId>(vsize);
  for (std::size_t c = 0; c < ncontexts; ++c) {
    if (!std::getline(in, line)) throw fail("truncated count table");
    std::istringstream ls(line);
    std::vector<TokenId> key(static_cast<std::size_t>(order - 1));
    for (auto& id : key)
      if (!(ls >> id) || id < 0 || id >= v) throw fail("bad context id");
    std::size_t n = 0;
    if (!(ls >> n)) throw fail("bad entry count");
    ContextCounts cc;
    for (std::size_t e = 0; e < n; ++e) {
      std::string entry;
      if (!(ls >> entry)) throw fail("truncated entry list");
      const auto colon = entry.find(':');
      if (colon == std::string::npos) throw fail("bad entry '" + entry + "'");
      const auto id = static_cast<TokenId>(std::stol(entry.substr(0, colon)));
      const auto count = static_cast<std::uint32_t>(std::stoul(entry.substr(colon + 1)));
      if (id < 0 || id >= v) throw fail("entry id out of range");
      cc.next.emplace_back(id, count);
      cc.total += count;
    }
    std::sort(cc.next.begin(), cc.next.end());
    model.counts_.emplace(std::move(key), std::move(cc));
  }
  return model;
}

void NGramModel::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file '" + path + "'");
  save(out);
}

NGramModel NGramModel::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open model file '" + path + "'");
  return load(in);
}

std::vector<std::vector<std::string>> read_corpus(std::istream& in) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto words = tokenize(line);
    if (!words.empty()) out.push_back(std::move(words));
  }
  return out;
}

std::vector<std::vector<std::string>> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus file '" + path + "'");
  return read_corpus(in);
}

}  // namespace k2t
