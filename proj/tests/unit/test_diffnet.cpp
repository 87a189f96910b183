#include <gtest/gtest.h>

#include <cmath>

#include "ic3net/diffnet/layers.hpp"
#include "ic3net/diffnet/ops.hpp"
#include "ic3net/diffnet/rmsprop.hpp"
#include "ic3net/errors.hpp"
#include "oracles.hpp"

namespace ic3net {
namespace {

using diffnet::Matrix;
using diffnet::Tape;
using diffnet::Tensor;
using testing::random_matrix;
using Mat = Matrix<double>;

TEST(Ops, SoftmaxOfEqualLogitsIsUniform) {
  Tape<double> t;
  const auto p = diffnet::softmax(t.constant(Mat::Zero(1, 2)));
  EXPECT_DOUBLE_EQ(p.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.value()(0, 1), 0.5);
}

TEST(Ops, SoftmaxRowsAreDistributions) {
  envkit::Rng rng(4);
  Tape<double> t;
  const auto p = diffnet::softmax(t.constant(random_matrix(6, 7, rng, -30, 30)));
  for (Eigen::Index r = 0; r < 6; ++r) {
    EXPECT_NEAR(p.value().row(r).sum(), 1.0, 1e-9);
    EXPECT_GE(p.value().row(r).minCoeff(), 0.0);
  }
}

TEST(Ops, IdentityMatmul) {
  envkit::Rng rng(1);
  Tape<double> t;
  const Mat v = random_matrix(3, 1, rng);
  const auto out = diffnet::matmul(t.constant(Mat::Identity(3, 3)), t.constant(v));
  EXPECT_EQ(out.value(), v);
}

TEST(Ops, TanhBackwardAtZero) {
  diffnet::ParameterSet<double> ps;
  ps.add("x", Mat::Zero(1, 1));
  Tape<double> t;
  const auto y = diffnet::tanh(t.watch(ps[0]));
  diffnet::backward(y, ps);
  EXPECT_DOUBLE_EQ(ps.grads()[0](0, 0), 1.0);
}

TEST(Ops, SumOfSquaresGradient) {
  diffnet::ParameterSet<double> ps;
  ps.add("w", (Mat(1, 2) << 1, 2).finished());
  Tape<double> t;
  const auto w = t.watch(ps[0]);
  diffnet::backward(diffnet::sum(diffnet::mul(w, w)), ps);
  EXPECT_DOUBLE_EQ(ps.grads()[0](0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ps.grads()[0](0, 1), 4.0);
}

TEST(Ops, GradientsAccumulateUntilZeroed) {
  diffnet::ParameterSet<double> ps;
  ps.add("w", (Mat(1, 2) << 1, 2).finished());
  for (int k = 0; k < 2; ++k) {
    Tape<double> t;
    const auto w = t.watch(ps[0]);
    diffnet::backward(diffnet::sum(diffnet::mul(w, w)), ps);
  }
  EXPECT_DOUBLE_EQ(ps.grads()[0](0, 1), 8.0);
  ps.zero_grad();
  EXPECT_DOUBLE_EQ(ps.grads()[0](0, 1), 0.0);
}

TEST(Ops, ConstantLossLeavesGradientsUntouched) {
  diffnet::ParameterSet<double> ps;
  ps.add("w", Mat::Ones(2, 2));
  Tape<double> t;
  t.watch(ps[0]);
  const auto c = t.constant(1, 1, 3.0);
  diffnet::backward(c, ps);
  EXPECT_TRUE(ps.grads()[0].isZero(0.0));
}

TEST(Ops, NonScalarLossIsContractError) {
  Tape<double> t;
  const auto v = t.constant(2, 1, 1.0);
  EXPECT_THROW(t.backward(v), ContractError);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  try {
    diffnet::matmul(t.constant(2, 3, 1.0), t.constant(2, 3, 1.0));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("2x3"), std::string::npos);
  }
  EXPECT_THROW(diffnet::add(t.constant(2, 3, 1.0), t.constant(3, 2, 1.0)), DimensionError);
  EXPECT_THROW(diffnet::concat(t.constant(2, 3, 1.0), t.constant(3, 3, 1.0)), DimensionError);
  EXPECT_THROW(diffnet::slice(t.constant(2, 3, 1.0), 2, 2), DimensionError);
}

TEST(Ops, LogOfNonPositiveIsDomainError) {
  Tape<double> t;
  EXPECT_THROW(diffnet::log(t.constant(1, 2, 0.0)), DomainError);
  EXPECT_THROW(diffnet::log(t.constant(1, 1, -1.0)), DomainError);
}

TEST(Ops, ClearedTapeHoldsNothing) {
  Tape<double> t;
  diffnet::ParameterSet<double> ps;
  ps.add("w", Mat::Ones(1, 1));
  diffnet::sum(diffnet::tanh(t.watch(ps[0])));
  EXPECT_GT(t.size(), 0u);
  t.clear();
  EXPECT_EQ(t.size(), 0u);
}

TEST(GradCheck, TwoLayerTanhNet) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::case_two_layer_tanh(seed);
    EXPECT_EQ(r.checked, 17u);
    EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
  }
}

TEST(GradCheck, HeadsAndPrimitives) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::case_heads(seed);
    EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
  }
}

TEST(GradCheck, LstmFiveSteps) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::case_lstm_chain(seed);
    EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
  }
}

TEST(Lstm, ZeroWeightsGiveZeroState) {
  Tape<double> t;
  envkit::Rng rng(2);
  const auto out = diffnet::lstm_cell(t.constant(random_matrix(2, 3, rng)), t.constant(2, 4, 0.0),
                                      t.constant(2, 4, 0.0), t.constant(16, 3, 0.0), t.constant(16, 4, 0.0),
                                      t.constant(1, 16, 0.0));
  EXPECT_TRUE(out.h.value().isZero(0.0));
  EXPECT_TRUE(out.s.value().isZero(0.0));
}

TEST(Lstm, SaturatedForgetGateKeepsCell) {
  envkit::Rng rng(3);
  const int H = 4;
  Mat bias = Mat::Zero(1, 4 * H);
  bias.block(0, 0, 1, H).setConstant(-20.0);  // input gate shut
  bias.block(0, H, 1, H).setConstant(20.0);   // forget gate open
  Tape<double> t;
  const Mat s = random_matrix(2, H, rng);
  const auto out = diffnet::lstm_cell(t.constant(random_matrix(2, 3, rng, -0.1, 0.1)),
                                      t.constant(random_matrix(2, H, rng, -0.1, 0.1)), t.constant(s),
                                      t.constant(random_matrix(4 * H, 3, rng, -0.1, 0.1)),
                                      t.constant(random_matrix(4 * H, H, rng, -0.1, 0.1)), t.constant(bias));
  EXPECT_TRUE(out.s.value().isApprox(s, 1e-6));
}

TEST(Lstm, ShapeMismatch) {
  Tape<double> t;
  EXPECT_THROW(diffnet::lstm_cell(t.constant(2, 3, 0.0), t.constant(2, 4, 0.0), t.constant(2, 4, 0.0),
                                  t.constant(12, 3, 0.0), t.constant(16, 4, 0.0), t.constant(1, 16, 0.0)),
               DimensionError);
}

// The LSTM equations written out with primitives, per gate block.
Tensor<double> unrolled_lstm(Tape<double>& t, const diffnet::ParameterSet<double>& ps, const diffnet::LstmSlots& sl,
                             const std::vector<Mat>& inputs, const Mat& r) {
  using namespace diffnet;
  const Eigen::Index H = sl.hidden_size;
  const auto wi = t.watch(ps[sl.w_ih]);
  const auto wh = t.watch(ps[sl.w_hh]);
  const auto b = t.watch(ps[sl.bias]);
  auto h = t.constant(r.rows(), H, 0.0);
  auto s = t.constant(r.rows(), H, 0.0);
  auto block = [&](const Tensor<double>& x, Eigen::Index k) {
    const Mat sel_rows = Mat::Identity(4 * H, 4 * H).block(k * H, 0, H, 4 * H);
    const auto sel = t.constant(sel_rows);
    const auto bx = matmul_nt(b, sel);
    return add(add(matmul_nt(x, matmul(sel, wi)), matmul_nt(h, matmul(sel, wh))), bx);
  };
  for (const auto& in : inputs) {
    const auto x = t.constant(in);
    const auto i = sigmoid(block(x, 0));
    const auto f = sigmoid(block(x, 1));
    const auto g = tanh(block(x, 2));
    const auto o = sigmoid(block(x, 3));
    s = add(mul(f, s), mul(i, g));
    h = mul(o, tanh(s));
  }
  return sum(mul(h, t.constant(r)));
}

TEST(Lstm, ChainedMatchesUnrolledExpression) {
  for (int T = 1; T <= 8; ++T) {
    envkit::Rng rng(100 + T);
    diffnet::ParameterSet<double> ps;
    const auto sl = diffnet::add_lstm(ps, "lstm", 3, 4, rng);
    ps[sl.bias].value = random_matrix(1, 16, rng);
    std::vector<Mat> inputs;
    for (int k = 0; k < T; ++k) inputs.push_back(random_matrix(2, 3, rng));
    const Mat r = random_matrix(2, 4, rng);

    const auto chained = testing::analytic_gradient(ps, [&](Tape<double>& t, const diffnet::ParameterSet<double>& p) {
      auto h = t.constant(2, 4, 0.0);
      auto s = t.constant(2, 4, 0.0);
      for (const auto& in : inputs) {
        const auto o = diffnet::lstm_cell(t, p, sl, t.constant(in), h, s);
        h = o.h;
        s = o.s;
      }
      return diffnet::sum(diffnet::mul(h, t.constant(r)));
    });
    const auto unrolled = testing::analytic_gradient(
        ps, [&](Tape<double>& t, const diffnet::ParameterSet<double>& p) { return unrolled_lstm(t, p, sl, inputs, r); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
      EXPECT_TRUE(chained[k].isApprox(unrolled[k], 1e-12)) << "T=" << T << " " << ps[k].name;
    }
  }
}

TEST(Lstm, BpttIsDeterministic) {
  envkit::Rng rng(9);
  diffnet::ParameterSet<double> ps;
  const auto sl = diffnet::add_lstm(ps, "lstm", 3, 4, rng);
  std::vector<Mat> inputs;
  for (int k = 0; k < 6; ++k) inputs.push_back(random_matrix(3, 3, rng));
  const Mat r = random_matrix(3, 4, rng);
  auto build = [&](Tape<double>& t, const diffnet::ParameterSet<double>& p) { return unrolled_lstm(t, p, sl, inputs, r); };
  const auto a = testing::analytic_gradient(ps, build);
  const auto b = testing::analytic_gradient(ps, build);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
}

TEST(RmsProp, ZeroGradientLeavesParameters) {
  diffnet::ParameterSet<double> ps;
  envkit::Rng rng(5);
  ps.add("w", random_matrix(3, 3, rng));
  const Mat before = ps[0].value;
  diffnet::RmsProp<double> opt(ps, {});
  opt.step(ps);
  EXPECT_EQ(ps[0].value, before);
}

TEST(RmsProp, FirstStepClosedForm) {
  const double g = 0.37, lr = 0.003, eps = 1e-6;
  diffnet::ParameterSet<double> ps;
  ps.add("w", Mat::Constant(1, 1, 1.0));
  ps.grads()[0](0, 0) = g;
  diffnet::RmsProp<double> opt(ps, {lr, 0.97, eps});
  opt.step(ps);
  EXPECT_NEAR(1.0 - ps[0].value(0, 0), lr * g / std::sqrt(0.03 * g * g + eps), 1e-15);
  EXPECT_EQ(ps.grads()[0](0, 0), 0.0);
}

TEST(RmsProp, ThreeStepRecursion) {
  const double grads[] = {0.5, -1.25, 2.0};
  const double lr = 0.01, decay = 0.9, eps = 1e-8;
  double acc = 0, w = 0.3;
  diffnet::ParameterSet<double> ps;
  ps.add("w", Mat::Constant(1, 1, w));
  diffnet::RmsProp<double> opt(ps, {lr, decay, eps});
  for (double g : grads) {
    acc = decay * acc + (1 - decay) * g * g;
    w -= lr * g / std::sqrt(acc + eps);
    ps.grads()[0](0, 0) = g;
    opt.step(ps);
    EXPECT_NEAR(ps[0].value(0, 0), w, 1e-12);
    EXPECT_NEAR(opt.mean_square()[0](0, 0), acc, 1e-12);
  }
  EXPECT_EQ(opt.steps(), 3);
}

TEST(RmsProp, NonFiniteGradientNamesParameterAndStep) {
  diffnet::ParameterSet<double> ps;
  ps.add("a", Mat::Zero(1, 1));
  ps.add("lstm.w_hh", Mat::Zero(2, 2));
  diffnet::RmsProp<double> opt(ps, {});
  opt.step(ps);
  ps.grads()[1](1, 0) = std::nan("");
  try {
    opt.step(ps);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lstm.w_hh"), std::string::npos);
    EXPECT_NE(msg.find("step 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace ic3net
