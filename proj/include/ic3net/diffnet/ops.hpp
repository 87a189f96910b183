#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ic3net/diffnet/tape.hpp"

// Differentiable primitives over 2-D tensors. Row vectors (1 x n) broadcast
// over rows in add/sub, which covers bias terms; nothing else broadcasts.

namespace ic3net::diffnet {

namespace detail {

template <typename Scalar>
void check_same_tape(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands recorded on different tapes");
}

template <typename Scalar>
[[noreturn]] void shape_mismatch(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                       shape_string(b.rows(), b.cols()));
}

// True when b is a 1 x n row broadcast against an m x n tensor a (m > 1).
template <typename Scalar>
bool row_broadcast(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols();
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) detail::shape_mismatch("matmul", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad_acc(ib).noalias() += t.value(ia).transpose() * g;
  });
}

/// a * b^T. Weight matrices are stored (out x in) so `matmul_nt(x, W)` maps
/// row-stacked inputs through W.
template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("matmul_nt", a, b);
  if (a.cols() != b.cols()) detail::shape_mismatch("matmul_nt", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value().transpose();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia).noalias() += g * t.value(ib);
    if (t.requires_grad(ib)) t.grad_acc(ib).noalias() += g.transpose() * t.value(ia);
  });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("add", a, b);
  const auto ia = a.id(), ib = b.id();
  if (a.shape() == b.shape()) {
    Matrix<Scalar> out = a.value() + b.value();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
      const auto& g = t.grad(self);
      if (t.requires_grad(ia)) t.grad_acc(ia) += g;
      if (t.requires_grad(ib)) t.grad_acc(ib) += g;
    });
  }
  if (!detail::row_broadcast(a, b)) detail::shape_mismatch("add", a, b);
  Matrix<Scalar> out = a.value().rowwise() + b.value().row(0);
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia) += g;
    if (t.requires_grad(ib)) t.grad_acc(ib) += g.colwise().sum();
  });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("sub", a, b);
  if (a.shape() != b.shape()) detail::shape_mismatch("sub", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia) += g;
    if (t.requires_grad(ib)) t.grad_acc(ib) -= g;
  });
}

/// Element-wise (Hadamard) product.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("mul", a, b);
  if (a.shape() != b.shape()) detail::shape_mismatch("mul", a, b);
  const auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia) += g.cwiseProduct(t.value(ib));
    if (t.requires_grad(ib)) t.grad_acc(ib) += g.cwiseProduct(t.value(ia));
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [ia, s](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia) += t.grad(self) * s;
  });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto y = t.value(self).array();
    t.grad_acc(ia).array() += t.grad(self).array() * (Scalar(1) - y * y);
  });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().array().exp().matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia).array() += t.grad(self).array() * t.value(self).array();
  });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto y = t.value(self).array();
    t.grad_acc(ia).array() += t.grad(self).array() * y * (Scalar(1) - y);
  });
}

/// Column-wise concatenation [a | b]; row counts must match.
template <typename Scalar>
Tensor<Scalar> concat(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape("concat", a, b);
  if (a.rows() != b.rows()) detail::shape_mismatch("concat", a, b);
  const auto ia = a.id(), ib = b.id();
  const auto ca = a.cols(), cb = b.cols();
  Matrix<Scalar> out(a.rows(), ca + cb);
  out << a.value(), b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad_acc(ia) += g.leftCols(ca);
    if (t.requires_grad(ib)) t.grad_acc(ib) += g.rightCols(cb);
  });
}

/// Columns [begin, begin + count).
template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count <= 0 || begin + count > a.cols()) {
    throw DimensionError("slice: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for shape " + shape_string(a.rows(), a.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().middleCols(begin, count);
  return a.tape()->record(std::move(out), {a}, [ia, begin, count](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia).middleCols(begin, count) += t.grad(self);
  });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia).array() += t.grad(self)(0, 0);
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  const Scalar n = static_cast<Scalar>(a.value().size());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape()->record(std::move(out), {a}, [ia, n](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia).array() += t.grad(self)(0, 0) / n;
  });
}

template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& a) {
  if ((a.value().array() <= Scalar(0)).any()) {
    throw DomainError("log: non-positive input in tensor of shape " + shape_string(a.rows(), a.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().array().log().matrix();
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    t.grad_acc(ia).array() += t.grad(self).array() / t.value(ia).array();
  });
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x) {
  Matrix<Scalar> y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  y.array().colwise() /= y.rowwise().sum().array();
  return y;
}

}  // namespace detail

/// Softmax over the last axis (each row independently).
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  return a.tape()->record(detail::softmax_rows<Scalar>(a.value()), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
    t.grad_acc(ia).array() += y.array() * (g.colwise() - dot).array();
  });
}

/// Row-wise log-softmax, numerically stable for large logits.
template <typename Scalar>
Tensor<Scalar> log_softmax(const Tensor<Scalar>& a) {
  const auto ia = a.id();
  const auto& x = a.value();
  Matrix<Scalar> shifted = x.colwise() - x.rowwise().maxCoeff();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix<Scalar> out = shifted.colwise() - lse;
  return a.tape()->record(std::move(out), {a}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const Matrix<Scalar> p = t.value(self).array().exp().matrix();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gsum = g.rowwise().sum();
    t.grad_acc(ia) += g - (p.array().colwise() * gsum.array()).matrix();
  });
}

/// Picks a(i, index[i]) for every row i; result is (rows x 1).
template <typename Scalar>
Tensor<Scalar> gather(const Tensor<Scalar>& a, std::span<const int> index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for shape " +
                         shape_string(a.rows(), a.cols()));
  }
  Matrix<Scalar> out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const int k = index[static_cast<std::size_t>(i)];
    if (k < 0 || k >= a.cols()) throw DimensionError("gather: index " + std::to_string(k) + " out of range");
    out(i, 0) = a.value()(i, k);
  }
  const auto ia = a.id();
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<Scalar>& t, std::size_t self) {
    auto& ga = t.grad_acc(ia);
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < idx.size(); ++i) ga(static_cast<Eigen::Index>(i), idx[i]) += g(static_cast<Eigen::Index>(i), 0);
  });
}

/// x * W^T + b with W stored (out x in) and b a (1 x out) row.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  return add(matmul_nt(x, weight), bias);
}

}  // namespace ic3net::diffnet
