#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "ic3net/diffnet/ops.hpp"
#include "ic3net/envkit/rng.hpp"

namespace ic3net::diffnet {

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn row-major.
template <typename Scalar>
Matrix<Scalar> uniform_init(Eigen::Index rows, Eigen::Index fan_in, envkit::Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix<Scalar> w(rows, fan_in);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return w;
}

/// Slots of a fully connected layer inside a ParameterSet.
struct LinearSlots {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

template <typename Scalar>
LinearSlots add_linear(ParameterSet<Scalar>& params, const std::string& name, Eigen::Index in, Eigen::Index out,
                       envkit::Rng& rng) {
  LinearSlots s;
  s.weight = params.add(name + ".weight", uniform_init<Scalar>(out, in, rng));
  s.bias = params.add(name + ".bias", Matrix<Scalar>::Zero(1, out));
  return s;
}

template <typename Scalar>
Tensor<Scalar> apply_linear(Tape<Scalar>& tape, const ParameterSet<Scalar>& params, const LinearSlots& s,
                            const Tensor<Scalar>& x) {
  return linear(x, tape.watch(params[s.weight]), tape.watch(params[s.bias]));
}

/// Slots of an LSTM: input-to-gates (4H x I), hidden-to-gates (4H x H) and
/// gate biases (1 x 4H). Gate blocks are stacked in the order
/// input, forget, cell, output.
struct LstmSlots {
  std::size_t w_ih = 0;
  std::size_t w_hh = 0;
  std::size_t bias = 0;
  Eigen::Index input_size = 0;
  Eigen::Index hidden_size = 0;
};

template <typename Scalar>
LstmSlots add_lstm(ParameterSet<Scalar>& params, const std::string& name, Eigen::Index input_size,
                   Eigen::Index hidden_size, envkit::Rng& rng) {
  LstmSlots s;
  s.input_size = input_size;
  s.hidden_size = hidden_size;
  s.w_ih = params.add(name + ".w_ih", uniform_init<Scalar>(4 * hidden_size, input_size, rng));
  s.w_hh = params.add(name + ".w_hh", uniform_init<Scalar>(4 * hidden_size, hidden_size, rng));
  s.bias = params.add(name + ".bias", Matrix<Scalar>::Zero(1, 4 * hidden_size));
  return s;
}

template <typename Scalar>
struct LstmOutput {
  Tensor<Scalar> h;
  Tensor<Scalar> s;
};

/// One recurrent step for a row-stack of agents:
///   i = sig(.), f = sig(.), g = tanh(.), o = sig(.)
///   s' = f * s + i * g,  h' = o * tanh(s')
template <typename Scalar>
LstmOutput<Scalar> lstm_cell(const Tensor<Scalar>& input, const Tensor<Scalar>& h, const Tensor<Scalar>& s,
                             const Tensor<Scalar>& w_ih, const Tensor<Scalar>& w_hh, const Tensor<Scalar>& bias) {
  const Eigen::Index hidden = h.cols();
  if (w_ih.rows() != 4 * hidden || w_hh.rows() != 4 * hidden || w_hh.cols() != hidden || bias.cols() != 4 * hidden) {
    throw DimensionError("lstm_cell: parameter shapes " + shape_string(w_ih.rows(), w_ih.cols()) + ", " +
                         shape_string(w_hh.rows(), w_hh.cols()) + " do not match hidden size " +
                         std::to_string(hidden));
  }
  if (s.shape() != h.shape()) detail::shape_mismatch("lstm_cell", h, s);
  if (input.rows() != h.rows()) detail::shape_mismatch("lstm_cell", input, h);

  const auto gates = add(add(matmul_nt(input, w_ih), matmul_nt(h, w_hh)), bias);
  const auto in_gate = sigmoid(slice(gates, 0, hidden));
  const auto forget_gate = sigmoid(slice(gates, hidden, hidden));
  const auto cell_gate = tanh(slice(gates, 2 * hidden, hidden));
  const auto out_gate = sigmoid(slice(gates, 3 * hidden, hidden));
  const auto s_next = add(mul(forget_gate, s), mul(in_gate, cell_gate));
  const auto h_next = mul(out_gate, tanh(s_next));
  return {h_next, s_next};
}

template <typename Scalar>
LstmOutput<Scalar> lstm_cell(Tape<Scalar>& tape, const ParameterSet<Scalar>& params, const LstmSlots& slots,
                             const Tensor<Scalar>& input, const Tensor<Scalar>& h, const Tensor<Scalar>& s) {
  if (input.cols() != slots.input_size) {
    throw DimensionError("lstm_cell: input width " + std::to_string(input.cols()) + " but layer expects " +
                         std::to_string(slots.input_size));
  }
  return lstm_cell(input, h, s, tape.watch(params[slots.w_ih]), tape.watch(params[slots.w_hh]),
                   tape.watch(params[slots.bias]));
}

}  // namespace ic3net::diffnet
