#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ic3net/errors.hpp"

namespace ic3net::diffnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::array<Eigen::Index, 2>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

/// A named learnable matrix. `slot` is its index inside the owning ParameterSet
/// and keys gradient buffers.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  std::size_t slot = 0;
};

/// Ordered collection of parameters plus one gradient accumulator per parameter.
template <typename Scalar>
class ParameterSet {
 public:
  using Mat = Matrix<Scalar>;

  std::size_t add(std::string name, Mat value) {
    const std::size_t slot = params_.size();
    grads_.push_back(Mat::Zero(value.rows(), value.cols()));
    params_.push_back(Parameter<Scalar>{std::move(name), std::move(value), slot});
    return slot;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return params_[i]; }

  std::vector<Mat>& grads() { return grads_; }
  const std::vector<Mat>& grads() const { return grads_; }

  const Parameter<Scalar>& find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return p;
    }
    throw ContractError("no parameter named '" + name + "'");
  }
  std::size_t slot_of(const std::string& name) const { return find(name).slot; }

  /// Zero-filled buffers shaped like every parameter.
  std::vector<Mat> zero_like() const {
    std::vector<Mat> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    return out;
  }

  void zero_grad() {
    for (auto& g : grads_) g.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter<Scalar>> params_;
  std::vector<Mat> grads_;
};

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// is alive and not cleared.
template <typename Scalar>
class Tensor {
 public:
  using Mat = Matrix<Scalar>;

  Tensor() = default;
  Tensor(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Mat& value() const { return tape_->value(id_); }
  /// Gradient from the most recent backward pass; empty if none reached it.
  const Mat& grad() const { return tape_->grad(id_); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Shape shape() const { return {value().rows(), value().cols()}; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar item() const {
    if (value().size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(rows(), cols()));
    return value()(0, 0);
  }

  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of primitive operations. Backward rules run in reverse
/// recording order. One tape per thread; never shared.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using TensorT = Tensor<Scalar>;
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  TensorT constant(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), false, nullptr});
    return TensorT(this, nodes_.size() - 1);
  }

  TensorT constant(Eigen::Index rows, Eigen::Index cols, Scalar fill) {
    return constant(Mat::Constant(rows, cols, fill));
  }

  /// Leaf for a learnable parameter. Watching the same slot twice returns the
  /// same node.
  TensorT watch(const Parameter<Scalar>& p) {
    if (p.slot >= param_nodes_.size()) param_nodes_.resize(p.slot + 1, kNone);
    if (param_nodes_[p.slot] != kNone) return TensorT(this, param_nodes_[p.slot]);
    nodes_.push_back(Node{p.value, Mat(), recording_, nullptr});
    const std::size_t id = nodes_.size() - 1;
    param_nodes_[p.slot] = id;
    if (recording_) leaves_.push_back(Leaf{id, p.slot});
    return TensorT(this, id);
  }

  /// Records an op result. The backward rule is kept only if some input
  /// requires grad and recording is enabled.
  TensorT record(Mat value, std::initializer_list<TensorT> inputs, BackwardFn fn) {
    bool needs = false;
    if (recording_) {
      for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    }
    nodes_.push_back(Node{std::move(value), Mat(), needs, needs ? std::move(fn) : BackwardFn{}});
    return TensorT(this, nodes_.size() - 1);
  }

  /// Reverse sweep from a scalar loss. Node gradients from any earlier sweep
  /// are discarded first.
  void backward(const TensorT& loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to a different tape");
    const Mat& lv = value(loss.id());
    if (lv.size() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.rows(), lv.cols()));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  /// Adds leaf gradients from the last backward sweep into `sinks`, indexed by
  /// parameter slot.
  void accumulate_into(std::span<Mat> sinks) const {
    for (const auto& leaf : leaves_) {
      const Mat& g = nodes_[leaf.node].grad;
      if (g.size() == 0) continue;
      if (leaf.slot >= sinks.size()) throw ContractError("accumulate_into: gradient buffer too small");
      sinks[leaf.slot] += g;
    }
  }

  void clear() {
    nodes_.clear();
    leaves_.clear();
    param_nodes_.clear();
  }

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator of node `id`, zero-initialized on first touch.
  /// Only valid inside backward rules.
  Mat& grad_acc(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad;
    BackwardFn backward;
  };
  struct Leaf {
    std::size_t node;
    std::size_t slot;
  };

  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::vector<std::size_t> param_nodes_;
  bool recording_ = true;
};

/// Disables recording on a tape for its lifetime.
template <typename Scalar>
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape<Scalar>& tape) : tape_(tape), previous_(tape.recording()) { tape_.set_recording(false); }
  ~NoGradGuard() { tape_.set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<Scalar>& tape_;
  bool previous_;
};

/// Backpropagates `loss` and adds the resulting parameter gradients into
/// `params.grads()`. Gradients keep accumulating across calls until
/// ParameterSet::zero_grad().
template <typename Scalar>
void backward(const Tensor<Scalar>& loss, ParameterSet<Scalar>& params) {
  loss.tape()->backward(loss);
  loss.tape()->accumulate_into(std::span<Matrix<Scalar>>(params.grads()));
}

}  // namespace ic3net::diffnet
