#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ic3net/diffnet/layers.hpp"
#include "ic3net/diffnet/ops.hpp"
#include "ic3net/diffnet/tape.hpp"
#include "ic3net/envkit/rng.hpp"
#include "ic3net/errors.hpp"

namespace ic3net::policy {

enum class ModelKind { kIc3Net, kCommNet, kIc, kIric };
enum class GateMode { kLearned, kFixedOpen, kFixedClosed };
enum class RewardMode { kIndividual, kGlobalAverage };
enum class SampleMode { kSample, kGreedy };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kIc3Net: return "ic3net";
    case ModelKind::kCommNet: return "commnet";
    case ModelKind::kIc: return "ic";
    case ModelKind::kIric: return "iric";
  }
  return "ic3net";
}

inline std::string to_string(GateMode g) {
  switch (g) {
    case GateMode::kLearned: return "learned";
    case GateMode::kFixedOpen: return "open";
    case GateMode::kFixedClosed: return "closed";
  }
  return "learned";
}

inline std::string to_string(RewardMode r) {
  return r == RewardMode::kIndividual ? "individual" : "global_average";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ic3net") return ModelKind::kIc3Net;
  if (s == "commnet") return ModelKind::kCommNet;
  if (s == "ic") return ModelKind::kIc;
  if (s == "iric") return ModelKind::kIric;
  throw ConfigError("unknown model kind '" + s + "' (expected ic3net, commnet, ic or iric)");
}

inline GateMode gate_mode_from_string(const std::string& s) {
  if (s == "learned") return GateMode::kLearned;
  if (s == "open") return GateMode::kFixedOpen;
  if (s == "closed") return GateMode::kFixedClosed;
  throw ConfigError("unknown gate mode '" + s + "' (expected learned, open or closed)");
}

/// Which of the four controllers to run. CommNet always communicates with a
/// shared averaged reward; IC and IRIC never communicate; IC3Net learns its
/// gate (or has it pinned open) and trains on individual rewards. IC3Net may
/// also be pinned closed, which makes it behave exactly like IRIC.
struct ModelVariant {
  ModelKind kind = ModelKind::kIc3Net;
  GateMode gate_mode = GateMode::kLearned;
  RewardMode reward_mode = RewardMode::kIndividual;

  static ModelVariant make(ModelKind kind) {
    switch (kind) {
      case ModelKind::kIc3Net: return {kind, GateMode::kLearned, RewardMode::kIndividual};
      case ModelKind::kCommNet: return {kind, GateMode::kFixedOpen, RewardMode::kGlobalAverage};
      case ModelKind::kIc: return {kind, GateMode::kFixedClosed, RewardMode::kGlobalAverage};
      case ModelKind::kIric: return {kind, GateMode::kFixedClosed, RewardMode::kIndividual};
    }
    return {};
  }

  static ModelVariant ic3net(GateMode gate) { return {ModelKind::kIc3Net, gate, RewardMode::kIndividual}; }

  void validate() const {
    const ModelVariant def = make(kind);
    if (kind == ModelKind::kIc3Net) {
      if (reward_mode != RewardMode::kIndividual) throw ConfigError("variant: ic3net trains on individual rewards");
      return;
    }
    if (gate_mode != def.gate_mode || reward_mode != def.reward_mode) {
      throw ConfigError("variant: " + to_string(kind) + " requires gate '" + to_string(def.gate_mode) +
                        "' and reward '" + to_string(def.reward_mode) + "'");
    }
  }

  std::string label() const {
    if (kind == ModelKind::kIc3Net && gate_mode != GateMode::kLearned) return "ic3net-" + to_string(gate_mode);
    return to_string(kind);
  }

  friend bool operator==(const ModelVariant&, const ModelVariant&) = default;
};

struct ModelShape {
  int obs_dim = 0;
  int num_actions = 0;
  int hidden = 128;
  bool skip = true;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Learnable weights shared by every agent of a population.
template <typename Scalar>
struct PolicyParams {
  ModelShape shape;
  diffnet::ParameterSet<Scalar> params;
  diffnet::LinearSlots encoder;
  diffnet::LstmSlots lstm;
  std::size_t comm = 0;  // C, (H x H)
  diffnet::LinearSlots gate_hidden;
  diffnet::LinearSlots gate_out;
  diffnet::LinearSlots action;
  diffnet::LinearSlots value;
};

/// Fresh parameters; deterministic under `seed`. Every variant carries the
/// full set (C and the gate head simply stay unused where not needed) so
/// checkpoints share one layout.
template <typename Scalar>
PolicyParams<Scalar> build_model(int obs_dim, int num_actions, int hidden, std::uint64_t seed, bool skip = true) {
  if (obs_dim <= 0 || num_actions <= 0 || hidden <= 0) {
    throw DimensionError("build_model: dimensions must be positive (obs " + std::to_string(obs_dim) + ", actions " +
                         std::to_string(num_actions) + ", hidden " + std::to_string(hidden) + ")");
  }
  PolicyParams<Scalar> m;
  m.shape = ModelShape{obs_dim, num_actions, hidden, skip};
  envkit::Rng rng(seed);
  auto& p = m.params;
  m.encoder = diffnet::add_linear(p, "encoder", obs_dim, hidden, rng);
  m.lstm = diffnet::add_lstm(p, "lstm", hidden, hidden, rng);
  m.comm = p.add("comm.C", diffnet::uniform_init<Scalar>(hidden, hidden, rng));
  m.gate_hidden = diffnet::add_linear(p, "gate.hidden", hidden, hidden, rng);
  m.gate_out = diffnet::add_linear(p, "gate.out", hidden, 2, rng);
  m.action = diffnet::add_linear(p, "action", hidden, num_actions, rng);
  m.value = diffnet::add_linear(p, "value", hidden, 1, rng);
  return m;
}

/// Recurrent carry for a row-stack of agents plus the gate each agent chose
/// for the coming step.
template <typename Scalar>
struct AgentStates {
  diffnet::Tensor<Scalar> h;
  diffnet::Tensor<Scalar> s;
  std::vector<int> gates;
  std::vector<Scalar> gate_log_probs;

  std::size_t size() const { return gates.size(); }
};

/// h = s = 0 and every gate open.
template <typename Scalar>
AgentStates<Scalar> init_states(diffnet::Tape<Scalar>& tape, int num_agents, int hidden) {
  if (num_agents < 1) throw ContractError("init_states: need at least one agent");
  AgentStates<Scalar> st;
  st.h = tape.constant(num_agents, hidden, Scalar(0));
  st.s = tape.constant(num_agents, hidden, Scalar(0));
  st.gates.assign(static_cast<std::size_t>(num_agents), 1);
  st.gate_log_probs.assign(static_cast<std::size_t>(num_agents), Scalar(0));
  return st;
}

/// Averaging matrix M with M(j, j') = g_j' / (J - 1) for alive j != j', so that
/// the comm vectors are the rows of M * H * C^T. J counts alive agents; with
/// J <= 1 the matrix is zero.
template <typename Scalar>
diffnet::Matrix<Scalar> comm_mixing(std::span<const int> gates, const std::vector<bool>& alive) {
  const auto n = static_cast<Eigen::Index>(gates.size());
  diffnet::Matrix<Scalar> m = diffnet::Matrix<Scalar>::Zero(n, n);
  const auto alive_count = static_cast<int>(std::count(alive.begin(), alive.end(), true));
  if (alive_count <= 1) return m;
  const Scalar w = Scalar(1) / static_cast<Scalar>(alive_count - 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!alive[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == j || !alive[static_cast<std::size_t>(k)]) continue;
      if (gates[static_cast<std::size_t>(k)] != 0) m(j, k) = w;
    }
  }
  return m;
}

/// c_j = (1/(J-1)) C sum_{j' != j, alive} g_j' h_j' for alive j; zero rows for
/// dead agents. Differentiable in `hiddens` and `comm`; gates are constants.
template <typename Scalar>
diffnet::Tensor<Scalar> compute_comm(const diffnet::Tensor<Scalar>& hiddens, std::span<const int> gates,
                                     const std::vector<bool>& alive, const diffnet::Tensor<Scalar>& comm) {
  const auto n = hiddens.rows();
  if (static_cast<Eigen::Index>(gates.size()) != n || static_cast<Eigen::Index>(alive.size()) != n) {
    throw ContractError("compute_comm: " + std::to_string(n) + " hidden rows but " + std::to_string(gates.size()) +
                        " gates and " + std::to_string(alive.size()) + " alive flags");
  }
  auto* tape = hiddens.tape();
  const auto mixing = tape->constant(comm_mixing<Scalar>(gates, alive));
  return diffnet::matmul_nt(diffnet::matmul(mixing, hiddens), comm);
}

template <typename Scalar>
struct StepOutput {
  std::vector<int> actions;
  diffnet::Tensor<Scalar> action_log_probs;  // (n x 1)
  diffnet::Tensor<Scalar> action_log_dist;   // (n x A) full log-softmax
  diffnet::Tensor<Scalar> values;            // (n x 1)
  diffnet::Tensor<Scalar> gate_log_probs;    // (n x 1), log f^g(next gate); zeros unless the gate is learned
  AgentStates<Scalar> next;
  diffnet::Matrix<Scalar> action_probs;
  diffnet::Matrix<Scalar> gate_probs;        // (n x 2) probability of [closed, open]; empty unless learned
};

/// Decisions to re-apply instead of sampling, used to rebuild the graph of a
/// recorded episode.
struct Replay {
  std::span<const int> actions;
  std::span<const int> gates;
};

namespace detail {

template <typename Scalar>
std::vector<int> choose(const diffnet::Matrix<Scalar>& probs, envkit::Rng& rng, SampleMode mode) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (mode == SampleMode::kGreedy) {
      Eigen::Index best = 0;
      probs.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    } else {
      out[static_cast<std::size_t>(i)] = rng.categorical(probs.row(i));
    }
  }
  return out;
}

}  // namespace detail

/// One synchronous timestep for every agent of an environment.
///
/// Order: restart the carry of freshly spawned agents, mix the previous hidden
/// states through the pending gates into comm vectors, step the LSTM on
/// e(o) + c, then read the action, value and next-gate heads from h' (plus
/// e(o) + c when skip connections are on). Actions are drawn before gates so
/// variants that do not sample gates consume the same random stream for
/// actions.
template <typename Scalar>
StepOutput<Scalar> policy_step(diffnet::Tape<Scalar>& tape, const PolicyParams<Scalar>& model,
                               const ModelVariant& variant, const Eigen::MatrixXd& observations,
                               const std::vector<bool>& alive, const std::vector<bool>& spawned,
                               const AgentStates<Scalar>& state, envkit::Rng& rng, SampleMode mode,
                               const Replay* replay = nullptr) {
  using diffnet::Matrix;
  const auto n = static_cast<Eigen::Index>(state.size());
  if (observations.cols() != model.shape.obs_dim) {
    throw DimensionError("policy_step: observation width " + std::to_string(observations.cols()) +
                         " but encoder expects " + std::to_string(model.shape.obs_dim));
  }
  if (observations.rows() != n || static_cast<Eigen::Index>(alive.size()) != n) {
    throw ContractError("policy_step: " + std::to_string(observations.rows()) + " observations for " +
                        std::to_string(n) + " agent states");
  }
  const auto& p = model.params;

  auto h = state.h;
  auto s = state.s;
  std::vector<int> gates = state.gates;
  const bool any_spawned = std::find(spawned.begin(), spawned.end(), true) != spawned.end();
  if (any_spawned) {
    Matrix<Scalar> keep = Matrix<Scalar>::Ones(n, model.shape.hidden);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (spawned[static_cast<std::size_t>(i)]) {
        keep.row(i).setZero();
        gates[static_cast<std::size_t>(i)] = 1;
      }
    }
    const auto keep_t = tape.constant(std::move(keep));
    h = diffnet::mul(h, keep_t);
    s = diffnet::mul(s, keep_t);
  }
  if (variant.gate_mode == GateMode::kFixedClosed) std::fill(gates.begin(), gates.end(), 0);
  if (variant.gate_mode == GateMode::kFixedOpen) std::fill(gates.begin(), gates.end(), 1);

  const auto obs = tape.constant(observations.cast<Scalar>());
  const auto encoded = diffnet::apply_linear(tape, p, model.encoder, obs);
  const auto comm = compute_comm(h, gates, alive, tape.watch(p[model.comm]));
  const auto x = diffnet::add(encoded, comm);
  const auto next = diffnet::lstm_cell(tape, p, model.lstm, x, h, s);
  const auto trunk = model.shape.skip ? diffnet::add(next.h, x) : next.h;

  StepOutput<Scalar> out;
  const auto action_logp = diffnet::log_softmax(diffnet::apply_linear(tape, p, model.action, trunk));
  out.action_probs = action_logp.value().array().exp().matrix();
  out.action_log_dist = action_logp;
  out.actions = replay ? std::vector<int>(replay->actions.begin(), replay->actions.end())
                       : detail::choose(out.action_probs, rng, mode);
  out.action_log_probs = diffnet::gather(action_logp, out.actions);
  out.values = diffnet::apply_linear(tape, p, model.value, trunk);

  out.next.h = next.h;
  out.next.s = next.s;
  out.next.gate_log_probs.assign(static_cast<std::size_t>(n), Scalar(0));
  if (variant.gate_mode == GateMode::kLearned) {
    const auto hidden = diffnet::tanh(diffnet::apply_linear(tape, p, model.gate_hidden, trunk));
    const auto gate_logp = diffnet::log_softmax(diffnet::apply_linear(tape, p, model.gate_out, hidden));
    out.gate_probs = gate_logp.value().array().exp().matrix();
    out.next.gates = replay ? std::vector<int>(replay->gates.begin(), replay->gates.end())
                            : detail::choose(out.gate_probs, rng, mode);
    out.gate_log_probs = diffnet::gather(gate_logp, out.next.gates);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.next.gate_log_probs[static_cast<std::size_t>(i)] = out.gate_log_probs.value()(i, 0);
    }
  } else {
    out.next.gates.assign(static_cast<std::size_t>(n), variant.gate_mode == GateMode::kFixedOpen ? 1 : 0);
    out.gate_log_probs = tape.constant(n, 1, Scalar(0));
  }
  return out;
}

}  // namespace ic3net::policy
