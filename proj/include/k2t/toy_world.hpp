#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "k2t/ngram.hpp"
#include "k2t/semantic_space.hpp"

namespace k2t {

// Desk-scale stand-in for "large LM + GloVe": a topic-structured synthetic
// corpus over a real frequency word list, plus embeddings in which words of
// one topic are close and inflections of one stem are closer still.
struct ToyWorldOptions {
  std::uint64_t seed = 7;
  int topics = 24;
  int dim = 32;
  int train_sentences = 50000;
  int eval_sentences = 50000;
  int min_len = 6;
  int max_len = 16;
  double function_word_rate = 0.5;
  double topic_stickiness = 0.7;
  double topic_weight = 0.8;
  double smoothing_k = 1e-11;
  double eval_smoothing_k = 0.01;
};

struct ToyWorld {
  std::vector<std::string> word_list;  // frequency-ordered source list
  std::unordered_set<std::string> stopwords;
  EmbeddingTable table;
  Vocabulary vocab;
  std::vector<std::vector<std::string>> train_corpus;
  std::vector<std::vector<std::string>> eval_corpus;
  std::vector<std::vector<TokenId>> train_ids;
  std::vector<std::vector<TokenId>> eval_ids;
};

ToyWorld build_toy_world(std::span<const std::string> word_list, const std::unordered_set<std::string>& stopwords,
                         const ToyWorldOptions& options = {});

// Generation model (bigram on the training split).
NGramModel toy_generation_model(const ToyWorld& world, const ToyWorldOptions& options = {});
// Evaluation model (bigram on the held-out split).
NGramModel toy_evaluation_model(const ToyWorld& world, const ToyWorldOptions& options = {});

// embeddings.txt, corpus.txt, eval_corpus.txt, gen.lm, eval.lm under `dir`.
void write_toy_world(const ToyWorld& world, const std::string& dir, const ToyWorldOptions& options = {});

}  // namespace k2t
