#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ic3net/errors.hpp"

namespace ic3net::envkit {

/// Ordered set of class labels. A cell is encoded as the sum of the one-hot
/// vectors of every label present there, so multiplicities add up.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> labels) {
    for (auto& l : labels) add(std::move(l));
  }

  std::size_t add(std::string label) {
    auto [it, inserted] = index_.emplace(label, labels_.size());
    if (inserted) labels_.push_back(std::move(label));
    return it->second;
  }

  std::size_t index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw VocabularyError("label '" + label + "' is not in the vocabulary");
    return it->second;
  }

  bool contains(const std::string& label) const { return index_.count(label) != 0; }
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Multi-hot encoding: component k counts occurrences of label k.
inline Eigen::VectorXd encode_cell(const Vocab& vocab, std::span<const std::string> entities) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
  for (const auto& e : entities) v(static_cast<Eigen::Index>(vocab.index(e))) += 1.0;
  return v;
}

inline std::string location_label(int row, int col) {
  return "loc:" + std::to_string(row) + "," + std::to_string(col);
}

}  // namespace ic3net::envkit
