#pragma once

#include <stdexcept>
#include <string>

namespace k2t {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed embedding file, model file or corpus.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class UnmappedWordError : public Error {
 public:
  explicit UnmappedWordError(const std::string& word)
      : Error("word is not mapped in the embedding table: '" + word + "'"), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

// Anything that went wrong on the language-model side: transport failure,
// malformed response, id mismatch, vector length mismatch.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// A generation failed mid-way. Carries the step at which it happened.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, int step)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// The guide words cannot be fitted into the generation budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace k2t
