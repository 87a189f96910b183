#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ic3net/envkit/environment.hpp"
#include "ic3net/envkit/rng.hpp"
#include "ic3net/policy/comm_policy.hpp"

namespace ic3net::train {

using Model = policy::PolicyParams<double>;
using Mask = std::vector<std::vector<bool>>;  // [step][agent]

/// One recorded episode. Row t of every per-step field describes the agents
/// as they were when they acted at step t; `rewards(t, i)` is what agent i
/// received for that action. `gates[t]` holds the gate chosen at step t for
/// step t + 1.
struct Trajectory {
  int agents = 0;
  std::uint64_t env_seed = 0;
  std::vector<Eigen::MatrixXd> observations;
  Mask alive;
  Mask spawned;
  Mask controllable;
  std::vector<std::vector<int>> actions;
  std::vector<std::vector<int>> gates;
  Eigen::MatrixXd rewards;  // steps x agents
  std::vector<std::string> populations;

  int env_steps = 0;  // environment steps until the episode ended
  bool success = false;

  int length() const { return static_cast<int>(actions.size()); }
};

/// Episode-level figures derived from a trajectory.
struct EpisodeSummary {
  int steps = 0;
  bool success = false;
  double mean_return = 0.0;  // mean undiscounted return over agents of the main population
  double gate_sum = 0.0;     // gate decisions of main-population agents
  double gate_count = 0.0;
  double prey_gate_sum = 0.0;
  double prey_gate_count = 0.0;
};

EpisodeSummary summarize(const Trajectory& traj);

/// Discounted returns per agent and step. An agent's return chain breaks at
/// any step where it is not alive (a TJ slot that exits and is later refilled
/// starts a fresh chain). With kGlobalAverage every alive agent's reward is
/// first replaced by the mean reward of the agents alive at that step.
Eigen::MatrixXd compute_returns(const Eigen::MatrixXd& rewards, const Mask& alive, double gamma,
                                policy::RewardMode mode);

/// Rolls one episode without recording gradients.
Trajectory run_episode(const Model& model, const policy::ModelVariant& variant, envkit::Environment& env,
                       std::uint64_t env_seed, envkit::Rng& rng, policy::SampleMode mode,
                       std::ostream* trace = nullptr);

/// Scripted controller: maps (environment, last timestep) to one action per agent.
using Actor = std::function<std::vector<int>(const envkit::Environment&, const envkit::TimeStep&)>;

Trajectory run_scripted_episode(envkit::Environment& env, std::uint64_t env_seed, const Actor& actor,
                                std::ostream* trace = nullptr);

/// Same, but starting from an already reset environment.
Trajectory run_scripted_from(envkit::Environment& env, envkit::TimeStep first, const Actor& actor,
                             std::ostream* trace = nullptr);

}  // namespace ic3net::train
