#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ic3net/diffnet/tape.hpp"

namespace ic3net::diffnet {

struct RmsPropConfig {
  double lr = 0.003;
  double decay = 0.97;
  double epsilon = 1e-6;
};

/// RMSProp with the epsilon inside the square root:
///   acc <- decay * acc + (1 - decay) * g^2
///   p   <- p - lr * g / sqrt(acc + eps)
/// Gradients are zeroed after every step.
template <typename Scalar>
class RmsProp {
 public:
  using Mat = Matrix<Scalar>;

  RmsProp(const ParameterSet<Scalar>& params, RmsPropConfig config)
      : config_(config), mean_square_(params.zero_like()) {}

  void step(ParameterSet<Scalar>& params) {
    if (params.size() != mean_square_.size()) throw ContractError("RmsProp: parameter set changed size");
    auto& grads = params.grads();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads[i].allFinite()) {
        throw TrainingError("non-finite gradient for parameter '" + params[i].name + "' at step " +
                            std::to_string(steps_));
      }
    }
    const Scalar decay = static_cast<Scalar>(config_.decay);
    const Scalar lr = static_cast<Scalar>(config_.lr);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto acc = mean_square_[i].array();
      const auto g = grads[i].array();
      acc = decay * acc + (Scalar(1) - decay) * g * g;
      params[i].value.array() -= lr * g / (acc + eps).sqrt();
    }
    params.zero_grad();
    ++steps_;
  }

  const std::vector<Mat>& mean_square() const { return mean_square_; }
  std::vector<Mat>& mean_square() { return mean_square_; }
  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  const RmsPropConfig& config() const { return config_; }

 private:
  RmsPropConfig config_;
  std::vector<Mat> mean_square_;
  long steps_ = 0;
};

/// Free-function form: one optimizer step over `params` using its gradient buffers.
template <typename Scalar>
void rmsprop_step(ParameterSet<Scalar>& params, RmsProp<Scalar>& optimizer) {
  optimizer.step(params);
}

}  // namespace ic3net::diffnet
