#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ic3net::envkit {

/// Action value for agents that are not active this step.
inline constexpr int kNoAction = -1;

/// Everything an environment reports after reset or step.
struct TimeStep {
  Eigen::MatrixXd observations;  // agent_count x observation_dim
  std::vector<double> rewards;   // reward for the action just taken; zeros after reset
  std::vector<bool> done;        // per agent
  std::vector<bool> alive;       // active agents: observed, act next step, join the comm pool
  std::vector<bool> controllable;  // the agent's action choice changes the environment
  std::vector<bool> spawned;     // slot now holds a new entity; recurrent state must restart
  bool episode_done = false;
  std::map<std::string, double> info;
};

/// Multi-agent environment contract shared by predator-prey and traffic junction.
/// After `episode_done`, step() is a no-op with zero rewards.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual TimeStep reset(std::uint64_t seed) = 0;
  virtual TimeStep step(std::span<const int> actions) = 0;

  virtual int action_count() const = 0;
  virtual int observation_dim() const = 0;
  virtual int agent_count() const = 0;

  /// Steps elapsed in the current episode.
  virtual int steps() const = 0;
  /// Per-episode metric: PP steps-to-capture, TJ collision-free flag.
  virtual bool success() const = 0;

  /// Population label of each agent ("predator", "prey", "car").
  virtual std::string population(int agent) const = 0;

  /// One-line JSON record of the current state for episode traces.
  virtual std::string trace_state() const = 0;
};

using EnvironmentPtr = std::unique_ptr<Environment>;

}  // namespace ic3net::envkit
