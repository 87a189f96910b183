#include "ic3net/env/predator_prey.hpp"

#include <algorithm>
#include <sstream>

#include "ic3net/errors.hpp"

namespace ic3net::pp {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kCompetitive: return "competitive";
    case Mode::kMixed: return "mixed";
    case Mode::kCooperative: return "cooperative";
  }
  return "mixed";
}

Mode mode_from_string(const std::string& s) {
  if (s == "competitive") return Mode::kCompetitive;
  if (s == "mixed") return Mode::kMixed;
  if (s == "cooperative") return Mode::kCooperative;
  throw ConfigError("unknown predator-prey mode '" + s + "' (expected competitive, mixed or cooperative)");
}

Config Config::standard(int grid, Mode mode) {
  Config c;
  c.grid = grid;
  c.mode = mode;
  switch (grid) {
    case 5: c.predators = 3; c.max_steps = 20; break;
    case 10: c.predators = 5; c.max_steps = 40; break;
    case 20: c.predators = 10; c.max_steps = 80; break;
    default: throw ConfigError("no standard predator-prey setting for grid " + std::to_string(grid));
  }
  return c;
}

void Config::validate() const {
  const bool standard_pair = (grid == 5 && max_steps == 20) || (grid == 10 && max_steps == 40) ||
                             (grid == 20 && max_steps == 80);
  if (!standard_pair) {
    throw ConfigError("env: (grid, max_steps) must be one of (5,20), (10,40), (20,80); got (" +
                      std::to_string(grid) + "," + std::to_string(max_steps) + ")");
  }
  if (predators < 1) throw ConfigError("env.predators: must be >= 1");
  if (vision < 0) throw ConfigError("env.vision: must be >= 0");
}

double pp_reward(Mode mode, bool reached, int n_on_prey, double r_explore, double r_prey) {
  if (!reached) return r_explore;
  if (n_on_prey < 1) throw ContractError("pp_reward: reached agent but no agent on prey");
  switch (mode) {
    case Mode::kMixed: return r_prey;
    case Mode::kCooperative: return r_prey * n_on_prey;
    case Mode::kCompetitive: return r_prey / n_on_prey;
  }
  return 0.0;
}

double pp_prey_reward(int n_on_prey, double alive_reward) { return n_on_prey == 0 ? alive_reward : 0.0; }

PredatorPrey::PredatorPrey(Config config) : config_(config) {
  config_.validate();
  for (int r = 0; r < config_.grid; ++r) {
    for (int c = 0; c < config_.grid; ++c) vocab_.add(envkit::location_label(r, c));
  }
  predator_class_ = vocab_.add("predator");
  prey_class_ = vocab_.add("prey");
}

int PredatorPrey::observation_dim() const {
  const int window = 2 * config_.vision + 1;
  return window * window * cell_dim();
}

std::string PredatorPrey::population(int agent) const { return agent < config_.predators ? "predator" : "prey"; }

int PredatorPrey::on_prey() const {
  return static_cast<int>(std::count(reached_.begin(), reached_.end(), true));
}

bool PredatorPrey::success() const { return on_prey() == config_.predators; }

envkit::TimeStep PredatorPrey::reset(std::uint64_t seed) {
  envkit::Rng rng(seed);
  const auto cells = static_cast<std::uint64_t>(config_.grid) * static_cast<std::uint64_t>(config_.grid);
  std::vector<Cell> predators;
  for (int i = 0; i < config_.predators; ++i) {
    const auto k = static_cast<int>(rng.below(cells));
    predators.push_back(Cell{k / config_.grid, k % config_.grid});
  }
  const auto k = static_cast<int>(rng.below(cells));
  return reset_layout(predators, Cell{k / config_.grid, k % config_.grid});
}

envkit::TimeStep PredatorPrey::reset_layout(const std::vector<Cell>& predators, Cell prey) {
  if (static_cast<int>(predators.size()) != config_.predators) {
    throw ContractError("reset_layout: expected " + std::to_string(config_.predators) + " predator cells");
  }
  predators_ = predators;
  prey_ = prey;
  reached_.assign(predators_.size(), false);
  steps_ = 0;
  update_reached();
  done_ = success();
  auto ts = make_timestep(std::vector<double>(static_cast<std::size_t>(agent_count()), 0.0));
  ts.spawned.assign(static_cast<std::size_t>(agent_count()), true);
  return ts;
}

void PredatorPrey::update_reached() {
  for (std::size_t i = 0; i < predators_.size(); ++i) {
    if (predators_[i] == prey_) reached_[i] = true;
  }
}

envkit::TimeStep PredatorPrey::step(std::span<const int> actions) {
  const int n = agent_count();
  if (static_cast<int>(actions.size()) != n) {
    throw ContractError("pp step: expected " + std::to_string(n) + " actions, got " + std::to_string(actions.size()));
  }
  for (int a : actions) {
    if (a != envkit::kNoAction && (a < 0 || a >= kMoveCount)) {
      throw ContractError("pp step: invalid action index " + std::to_string(a));
    }
  }
  if (done_) return make_timestep(std::vector<double>(static_cast<std::size_t>(n), 0.0));

  const int last = config_.grid - 1;
  for (int i = 0; i < config_.predators; ++i) {
    if (reached_[static_cast<std::size_t>(i)]) continue;
    Cell& p = predators_[static_cast<std::size_t>(i)];
    switch (actions[static_cast<std::size_t>(i)]) {
      case kUp: p.row = std::max(0, p.row - 1); break;
      case kDown: p.row = std::min(last, p.row + 1); break;
      case kLeft: p.col = std::max(0, p.col - 1); break;
      case kRight: p.col = std::min(last, p.col + 1); break;
      default: break;
    }
  }
  ++steps_;
  update_reached();

  const int count = on_prey();
  std::vector<double> rewards(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < config_.predators; ++i) {
    rewards[static_cast<std::size_t>(i)] =
        pp_reward(config_.mode, reached_[static_cast<std::size_t>(i)], count, config_.r_explore, config_.r_prey);
  }
  if (config_.trainable_prey) rewards.back() = pp_prey_reward(count, config_.prey_alive_reward);

  done_ = success() || steps_ >= config_.max_steps;
  return make_timestep(std::move(rewards));
}

void PredatorPrey::observe_into(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out, Cell center) const {
  out.setZero();
  const int v = config_.vision;
  const int dim = cell_dim();
  int k = 0;
  for (int dr = -v; dr <= v; ++dr) {
    for (int dc = -v; dc <= v; ++dc, ++k) {
      const int r = center.row + dr;
      const int c = center.col + dc;
      if (r < 0 || c < 0 || r >= config_.grid || c >= config_.grid) continue;
      auto cell = out.segment(k * dim, dim);
      cell(r * config_.grid + c) += 1.0;
      for (const auto& p : predators_) {
        if (p.row == r && p.col == c) cell(static_cast<Eigen::Index>(predator_class_)) += 1.0;
      }
      if (prey_.row == r && prey_.col == c) cell(static_cast<Eigen::Index>(prey_class_)) += 1.0;
    }
  }
}

envkit::TimeStep PredatorPrey::make_timestep(std::vector<double> rewards) const {
  const int n = agent_count();
  envkit::TimeStep ts;
  ts.observations = Eigen::MatrixXd::Zero(n, observation_dim());
  for (int i = 0; i < config_.predators; ++i) observe_into(ts.observations.row(i), predators_[static_cast<std::size_t>(i)]);
  if (config_.trainable_prey) observe_into(ts.observations.row(n - 1), prey_);
  ts.rewards = std::move(rewards);
  ts.done.assign(static_cast<std::size_t>(n), done_);
  ts.alive.assign(static_cast<std::size_t>(n), true);
  ts.controllable.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < config_.predators; ++i) ts.controllable[static_cast<std::size_t>(i)] = !reached_[static_cast<std::size_t>(i)];
  ts.spawned.assign(static_cast<std::size_t>(n), false);
  ts.episode_done = done_;
  ts.info["n_on_prey"] = on_prey();
  return ts;
}

std::string PredatorPrey::trace_state() const {
  std::ostringstream os;
  os << "{\"predators\":[";
  for (std::size_t i = 0; i < predators_.size(); ++i) {
    os << (i ? "," : "") << "[" << predators_[i].row << "," << predators_[i].col << "]";
  }
  os << "],\"prey\":[" << prey_.row << "," << prey_.col << "],\"reached\":[";
  for (std::size_t i = 0; i < reached_.size(); ++i) os << (i ? "," : "") << (reached_[i] ? 1 : 0);
  os << "]}";
  return os.str();
}

}  // namespace ic3net::pp
