#pragma once

#include <stdexcept>
#include <string>

namespace ic3net {

// Operand shapes do not conform for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (e.g. log of 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Numerical failure during optimization (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rollout collection failed; carries the id of the shard that raised it.
class CollectionError : public std::runtime_error {
 public:
  CollectionError(int worker, const std::string& what)
      : std::runtime_error("worker " + std::to_string(worker) + ": " + what), worker_(worker) {}
  int worker() const noexcept { return worker_; }

 private:
  int worker_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ComparisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ic3net
