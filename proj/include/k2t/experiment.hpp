#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "k2t/decoding.hpp"
#include "k2t/metrics.hpp"
#include "k2t/ngram.hpp"
#include "k2t/semantic_space.hpp"

namespace k2t {

std::vector<std::string> read_word_list(const std::string& path);
std::unordered_set<std::string> read_word_set(const std::string& path);

// Drops the first 500 entries of the frequency-ordered list and every
// stopword, then draws `n_sets` sets of `set_size` distinct words (sets are
// drawn independently). Throws ContractError if the list is shorter than
// 1000 entries or the pool is smaller than set_size.
std::vector<std::vector<std::string>> build_keyword_sets(std::span<const std::string> word_list,
                                                         const std::unordered_set<std::string>& stopwords,
                                                         int n_sets = 50, int set_size = 5, std::uint64_t seed = 0);

struct ExperimentSpec {
  std::vector<std::vector<std::string>> keyword_sets;
  std::vector<double> lambda0_grid = {5.0};
  std::vector<Strategy> strategy_grid = {Strategy::closest};
  std::vector<Algorithm> algorithm_grid = {Algorithm::nucleus};
  std::vector<std::uint64_t> seeds = {0};

  int max_len = 90;
  double nucleus_p = 0.9;
  int beam_width = 4;
  double growth_c = 100.0;
  bool annealing = true;
  SimilarityMode similarity = SimilarityMode::semantic;
  std::string prompt;

  // Keyword-set construction when keyword_sets is empty.
  std::string word_list;
  std::string stopwords;
  int n_sets = 50;
  int set_size = 5;
  std::uint64_t keyword_seed = 0;

  // Resources.
  std::string embeddings;
  std::string lm;
  std::string corpus;
  int order = 2;
  double smoothing = 0.1;
  std::string eval_lm;
  std::string eval_corpus;
  int eval_order = 2;
  std::string output;

  void validate() const;
};

ExperimentSpec parse_experiment_spec(const nlohmann::json& doc);
ExperimentSpec load_experiment_spec(const std::string& path);

struct ExperimentResources {
  const EmbeddingTable* table = nullptr;
  LanguageModel* model = nullptr;
  LanguageModel* eval_model = nullptr;
};

// Owns whatever load_resources() read from disk.
struct LoadedResources {
  std::unique_ptr<EmbeddingTable> table;
  std::unique_ptr<LanguageModel> model;
  std::unique_ptr<LanguageModel> eval_model;
  ExperimentResources view() const { return {table.get(), model.get(), eval_model.get()}; }
};

LoadedResources load_resources(const ExperimentSpec& spec);
std::vector<std::vector<std::string>> resolve_keyword_sets(const ExperimentSpec& spec);

struct CellResult {
  int cell_id = 0;
  double lambda0 = 0.0;
  Strategy strategy = Strategy::closest;
  Algorithm algorithm = Algorithm::nucleus;
  Summary ppl;
  Summary rep;  // percent
  Summary sr;   // percent
  int failures = 0;
  std::string failure_message;
  std::vector<GenerationResult> generations;  // [run][set], kept only if requested
};

struct RunOptions {
  bool keep_generations = false;
};

// Perplexity, repetition and success rate of one generation, the way the
// experiment runner scores it.
struct TextScores {
  double ppl = 0.0;
  double rep = 0.0;  // fraction, not percent
  double sr = 0.0;   // percent
};
TextScores score_generation(const GenerationResult& g, std::span<const std::string> keywords,
                            LanguageModel& eval_model, std::span<const TokenId> prompt,
                            const Vocabulary& gen_vocab);

std::vector<CellResult> run_experiment(const ExperimentSpec& spec, const ExperimentResources& res,
                                       const RunOptions& options = {});

inline constexpr std::string_view kCsvHeader =
    "cell_id,lambda0,strategy,algorithm,ppl_mean,ppl_std,rep_mean,rep_std,sr_mean,sr_std,failures";

std::string format_csv(std::span<const CellResult> cells);

}  // namespace k2t
