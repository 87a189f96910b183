#include "ic3net/train/rollout.hpp"

#include <sstream>

namespace ic3net::train {

namespace {

template <typename T>
void write_list(std::ostream& os, const std::vector<T>& v) {
  os << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << "]";
}

void write_trace_line(std::ostream& os, int step, const envkit::Environment& env, const std::vector<int>& actions,
                      const std::vector<int>& gates, const std::vector<double>& rewards) {
  os << "{\"step\":" << step << ",\"state\":" << env.trace_state() << ",\"actions\":";
  write_list(os, actions);
  os << ",\"gates\":";
  write_list(os, gates);
  os << ",\"rewards\":";
  write_list(os, rewards);
  os << "}\n";
}

void start(Trajectory& traj, const envkit::Environment& env, std::uint64_t seed) {
  traj.agents = env.agent_count();
  traj.env_seed = seed;
  traj.populations.clear();
  for (int i = 0; i < traj.agents; ++i) traj.populations.push_back(env.population(i));
}

void finish(Trajectory& traj, const envkit::Environment& env, const std::vector<std::vector<double>>& rewards) {
  traj.rewards = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rewards.size()), traj.agents);
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    for (int i = 0; i < traj.agents; ++i) traj.rewards(static_cast<Eigen::Index>(t), i) = rewards[t][static_cast<std::size_t>(i)];
  }
  traj.env_steps = env.steps();
  traj.success = env.success();
}

std::vector<int> masked_actions(const std::vector<int>& actions, const std::vector<bool>& alive) {
  std::vector<int> out(actions.size(), envkit::kNoAction);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (alive[i]) out[i] = actions[i];
  }
  return out;
}

}  // namespace

EpisodeSummary summarize(const Trajectory& traj) {
  EpisodeSummary s;
  s.steps = traj.env_steps;
  s.success = traj.success;
  if (traj.agents == 0) return s;
  const std::string& main = traj.populations.front();
  double total = 0.0;
  int counted = 0;
  for (int i = 0; i < traj.agents; ++i) {
    if (traj.populations[static_cast<std::size_t>(i)] != main) continue;
    bool ever_alive = false;
    for (int t = 0; t < traj.length(); ++t) ever_alive = ever_alive || traj.alive[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
    if (!ever_alive) continue;
    total += traj.rewards.col(i).sum();
    ++counted;
  }
  s.mean_return = counted > 0 ? total / counted : 0.0;
  for (int t = 0; t < traj.length(); ++t) {
    for (int i = 0; i < traj.agents; ++i) {
      if (!traj.alive[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) continue;
      const double g = traj.gates[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      if (traj.populations[static_cast<std::size_t>(i)] == "prey") {
        s.prey_gate_sum += g;
        s.prey_gate_count += 1.0;
      } else {
        s.gate_sum += g;
        s.gate_count += 1.0;
      }
    }
  }
  return s;
}

Eigen::MatrixXd compute_returns(const Eigen::MatrixXd& rewards, const Mask& alive, double gamma,
                                policy::RewardMode mode) {
  const auto steps = rewards.rows();
  const auto agents = rewards.cols();
  if (static_cast<Eigen::Index>(alive.size()) != steps) {
    throw ContractError("compute_returns: alive mask has " + std::to_string(alive.size()) + " steps, rewards have " +
                        std::to_string(steps));
  }
  Eigen::MatrixXd r = rewards;
  if (mode == policy::RewardMode::kGlobalAverage) {
    for (Eigen::Index t = 0; t < steps; ++t) {
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < agents; ++i) {
        if (alive[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) {
          sum += rewards(t, i);
          ++count;
        }
      }
      if (count == 0) continue;
      for (Eigen::Index i = 0; i < agents; ++i) {
        if (alive[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) r(t, i) = sum / count;
      }
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(steps, agents);
  for (Eigen::Index i = 0; i < agents; ++i) {
    double running = 0.0;
    for (Eigen::Index t = steps; t-- > 0;) {
      if (!alive[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) {
        running = 0.0;
        continue;
      }
      running = r(t, i) + gamma * running;
      out(t, i) = running;
    }
  }
  return out;
}

Trajectory run_episode(const Model& model, const policy::ModelVariant& variant, envkit::Environment& env,
                       std::uint64_t env_seed, envkit::Rng& rng, policy::SampleMode mode, std::ostream* trace) {
  using Mat = diffnet::Matrix<double>;
  Trajectory traj;
  start(traj, env, env_seed);
  envkit::TimeStep ts = env.reset(env_seed);
  if (trace) write_trace_line(*trace, 0, env, {}, {}, {});

  diffnet::Tape<double> tape;
  diffnet::NoGradGuard<double> guard(tape);
  const int hidden = model.shape.hidden;
  Mat h = Mat::Zero(traj.agents, hidden);
  Mat s = Mat::Zero(traj.agents, hidden);
  std::vector<int> gates(static_cast<std::size_t>(traj.agents), 1);
  std::vector<std::vector<double>> rewards;

  while (!ts.episode_done) {
    tape.clear();
    policy::AgentStates<double> state;
    state.h = tape.constant(h);
    state.s = tape.constant(s);
    state.gates = gates;
    state.gate_log_probs.assign(gates.size(), 0.0);
    auto out = policy::policy_step(tape, model, variant, ts.observations, ts.alive, ts.spawned, state, rng, mode);

    const auto actions = masked_actions(out.actions, ts.alive);
    envkit::TimeStep next = env.step(actions);

    traj.observations.push_back(ts.observations);
    traj.alive.push_back(ts.alive);
    traj.spawned.push_back(ts.spawned);
    traj.controllable.push_back(ts.controllable);
    traj.actions.push_back(out.actions);
    traj.gates.push_back(out.next.gates);
    rewards.push_back(next.rewards);
    if (trace) write_trace_line(*trace, env.steps(), env, actions, out.next.gates, next.rewards);

    h = out.next.h.value();
    s = out.next.s.value();
    gates = out.next.gates;
    ts = std::move(next);
  }
  finish(traj, env, rewards);
  return traj;
}

Trajectory run_scripted_episode(envkit::Environment& env, std::uint64_t env_seed, const Actor& actor,
                                std::ostream* trace) {
  auto first = env.reset(env_seed);
  auto traj = run_scripted_from(env, std::move(first), actor, trace);
  traj.env_seed = env_seed;
  return traj;
}

Trajectory run_scripted_from(envkit::Environment& env, envkit::TimeStep first, const Actor& actor,
                             std::ostream* trace) {
  Trajectory traj;
  start(traj, env, 0);
  envkit::TimeStep ts = std::move(first);
  if (trace) write_trace_line(*trace, 0, env, {}, {}, {});
  std::vector<std::vector<double>> rewards;
  const std::vector<int> no_gates(static_cast<std::size_t>(traj.agents), 0);
  while (!ts.episode_done) {
    const auto actions = masked_actions(actor(env, ts), ts.alive);
    envkit::TimeStep next = env.step(actions);
    traj.observations.push_back(ts.observations);
    traj.alive.push_back(ts.alive);
    traj.spawned.push_back(ts.spawned);
    traj.controllable.push_back(ts.controllable);
    traj.actions.push_back(actions);
    traj.gates.push_back(no_gates);
    rewards.push_back(next.rewards);
    if (trace) write_trace_line(*trace, env.steps(), env, actions, {}, next.rewards);
    ts = std::move(next);
  }
  finish(traj, env, rewards);
  return traj;
}

}  // namespace ic3net::train
