#include "ic3net/env/traffic_junction.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "ic3net/errors.hpp"

namespace ic3net::tj {

std::string to_string(Level level) {
  switch (level) {
    case Level::kEasy: return "easy";
    case Level::kMedium: return "medium";
    case Level::kHard: return "hard";
  }
  return "easy";
}

Level level_from_string(const std::string& s) {
  if (s == "easy") return Level::kEasy;
  if (s == "medium") return Level::kMedium;
  if (s == "hard") return Level::kHard;
  throw ConfigError("unknown traffic-junction level '" + s + "' (expected easy, medium or hard)");
}

LevelSpec level_spec(Level level) {
  switch (level) {
    case Level::kEasy: return {Level::kEasy, 7, 0.1, 0.3, 5, 2, 1, false, 1, 20};
    case Level::kMedium: return {Level::kMedium, 14, 0.05, 0.2, 10, 4, 3, true, 1, 40};
    case Level::kHard: return {Level::kHard, 18, 0.02, 0.05, 20, 8, 7, true, 4, 60};
  }
  throw ConfigError("unknown level");
}

namespace {

// A one-way lane: a full row (horizontal) or column traversed in direction
// +1 (east / south) or -1 (west / north). Two-way roads are two adjacent
// lanes with right-hand traffic.
struct Lane {
  bool horizontal;
  int index;
  int dir;
};

std::vector<Lane> lanes_of(Level level) {
  switch (level) {
    case Level::kEasy: return {{true, 3, +1}, {false, 3, +1}};
    case Level::kMedium: return {{true, 7, +1}, {true, 6, -1}, {false, 6, +1}, {false, 7, -1}};
    case Level::kHard:
      return {{true, 5, +1}, {true, 13, +1}, {true, 4, -1}, {true, 12, -1},
              {false, 4, +1}, {false, 12, +1}, {false, 5, -1}, {false, 13, -1}};
  }
  return {};
}

struct Dir {
  int dr;
  int dc;
  friend bool operator==(const Dir&, const Dir&) = default;
};

Dir dir_of(const Lane& l) { return l.horizontal ? Dir{0, l.dir} : Dir{l.dir, 0}; }

Cell entry_of(const Lane& l, int dim) {
  if (l.horizontal) return {l.index, l.dir > 0 ? 0 : dim - 1};
  return {l.dir > 0 ? 0 : dim - 1, l.index};
}

struct Search {
  const std::vector<Lane>& lanes;
  int dim;
  Dir initial;
  std::vector<Route> found;

  bool inside(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < dim && c.col < dim; }

  void walk(std::vector<Cell>& path, Dir dir, int turns) {
    const Cell here = path.back();
    std::vector<std::pair<Dir, int>> options{{dir, turns}};
    if (turns < 2) {
      for (const auto& lane : lanes) {
        const Dir d = dir_of(lane);
        const bool perpendicular = (d.dr == 0) != (dir.dr == 0);
        const bool crosses = lane.horizontal ? lane.index == here.row : lane.index == here.col;
        if (perpendicular && crosses) options.emplace_back(d, turns + 1);
      }
    }
    for (const auto& [d, t] : options) {
      const Cell next{here.row + d.dr, here.col + d.dc};
      if (!inside(next)) {
        if (!(d.dr == -initial.dr && d.dc == -initial.dc)) found.push_back(Route{0, t, path});
        continue;
      }
      if (std::find(path.begin(), path.end(), next) != path.end()) continue;
      path.push_back(next);
      walk(path, d, t);
      path.pop_back();
    }
  }
};

}  // namespace

std::vector<std::vector<Route>> build_routes(Level level) {
  const LevelSpec spec = level_spec(level);
  const auto lanes = lanes_of(level);
  std::vector<std::vector<Route>> out;
  for (std::size_t e = 0; e < lanes.size(); ++e) {
    Search search{lanes, spec.dim, dir_of(lanes[e]), {}};
    std::vector<Cell> path{entry_of(lanes[e], spec.dim)};
    search.walk(path, dir_of(lanes[e]), 0);
    auto& found = search.found;
    std::sort(found.begin(), found.end(), [](const Route& a, const Route& b) {
      if (a.turns != b.turns) return a.turns < b.turns;
      if (a.cells.size() != b.cells.size()) return a.cells.size() < b.cells.size();
      return a.cells < b.cells;
    });
    if (static_cast<int>(found.size()) < spec.routes_per_entry) {
      throw ContractError("build_routes: entry " + std::to_string(e) + " has only " + std::to_string(found.size()) +
                          " candidate routes");
    }
    found.resize(static_cast<std::size_t>(spec.routes_per_entry));
    for (auto& r : found) r.entry = static_cast<int>(e);
    out.push_back(std::move(found));
  }
  return out;
}

std::vector<Cell> road_cells(Level level) {
  const int dim = level_spec(level).dim;
  std::set<Cell> cells;
  for (const auto& lane : lanes_of(level)) {
    for (int k = 0; k < dim; ++k) cells.insert(lane.horizontal ? Cell{lane.index, k} : Cell{k, lane.index});
  }
  return {cells.begin(), cells.end()};
}

std::string format_routes(const std::vector<std::vector<Route>>& routes) {
  std::ostringstream os;
  for (const auto& entry : routes) {
    for (std::size_t r = 0; r < entry.size(); ++r) {
      os << entry[r].entry << " " << r << ":";
      for (const auto& c : entry[r].cells) os << " " << c.row << "," << c.col;
      os << "\n";
    }
  }
  return os.str();
}

double tj_reward(int collided, int tau, double r_coll, double r_time) {
  if (tau < 1) throw ContractError("tj_reward: tau must be >= 1, got " + std::to_string(tau));
  if (collided != 0 && collided != 1) throw ContractError("tj_reward: collision indicator must be 0 or 1");
  return r_coll * collided + r_time * tau;
}

Curriculum Curriculum::compressed(double factor) const {
  Curriculum c;
  c.hold_until = static_cast<int>(hold_until / factor + 0.5);
  c.ramp_until = static_cast<int>(ramp_until / factor + 0.5);
  return c;
}

double curriculum_rate(int epoch, Level level, const Curriculum& schedule) {
  if (epoch < 0) throw ContractError("curriculum_rate: epoch must be >= 0");
  const LevelSpec spec = level_spec(level);
  if (epoch <= schedule.hold_until) return spec.p_arrive_start;
  if (epoch >= schedule.ramp_until) return spec.p_arrive_end;
  const double t = static_cast<double>(epoch - schedule.hold_until) /
                   static_cast<double>(schedule.ramp_until - schedule.hold_until);
  return spec.p_arrive_start + t * (spec.p_arrive_end - spec.p_arrive_start);
}

TrafficJunction::TrafficJunction(Config config) : config_(config), spec_(level_spec(config.level)) {
  n_total_ = config_.n_total > 0 ? config_.n_total : spec_.n_total;
  max_steps_ = config_.max_steps > 0 ? config_.max_steps : spec_.max_steps;
  if (config_.p_arrive < 0.0 || config_.p_arrive > 1.0) throw ConfigError("env.p_arrive: must lie in [0, 1]");
  routes_ = build_routes(config_.level);
  for (int r = 0; r < spec_.dim; ++r) {
    for (int c = 0; c < spec_.dim; ++c) vocab_.add(envkit::location_label(r, c));
  }
  car_class_ = vocab_.add("car");
  cars_.resize(static_cast<std::size_t>(n_total_));
}

int TrafficJunction::observation_dim() const {
  return kActionCount + spec_.routes_per_entry + static_cast<int>(vocab_.size());
}

int TrafficJunction::active_count() const {
  return static_cast<int>(std::count_if(cars_.begin(), cars_.end(), [](const Car& c) { return c.active; }));
}

Cell TrafficJunction::cell_of(const Car& car) const {
  return routes_[static_cast<std::size_t>(car.entry)][static_cast<std::size_t>(car.route)]
      .cells[static_cast<std::size_t>(car.position)];
}

void TrafficJunction::place_car(int slot, int entry, int route, int position, int tau) {
  Car& car = cars_.at(static_cast<std::size_t>(slot));
  car = Car{true, entry, route, position, tau, kBrake};
  done_ = false;
}

envkit::TimeStep TrafficJunction::reset(std::uint64_t seed) {
  rng_ = envkit::Rng(seed);
  cars_.assign(static_cast<std::size_t>(n_total_), Car{});
  steps_ = 0;
  collided_ = false;
  done_ = false;
  last_collisions_ = 0;
  std::vector<bool> spawned(cars_.size(), false);
  spawn(std::vector<bool>(cars_.size(), true), spawned);
  return make_timestep(std::vector<double>(cars_.size(), 0.0), std::move(spawned));
}

void TrafficJunction::spawn(const std::vector<bool>& free_at_start, std::vector<bool>& spawned) {
  for (std::size_t e = 0; e < routes_.size(); ++e) {
    if (!rng_.bernoulli(config_.p_arrive)) continue;
    const auto route = static_cast<int>(rng_.below(routes_[e].size()));
    const Cell entry = routes_[e].front().cells.front();
    bool occupied = false;
    for (const auto& car : cars_) occupied = occupied || (car.active && cell_of(car) == entry);
    if (occupied) continue;
    for (std::size_t slot = 0; slot < cars_.size(); ++slot) {
      if (free_at_start[slot] && !cars_[slot].active) {
        cars_[slot] = Car{true, static_cast<int>(e), route, 0, 0, kBrake};
        spawned[slot] = true;
        break;
      }
    }
  }
}

envkit::TimeStep TrafficJunction::step(std::span<const int> actions) {
  if (actions.size() != cars_.size()) {
    throw ContractError("tj step: expected " + std::to_string(cars_.size()) + " actions, got " +
                        std::to_string(actions.size()));
  }
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    const int a = actions[i];
    if (!cars_[i].active && a != envkit::kNoAction) {
      throw ContractError("tj step: action given for inactive car slot " + std::to_string(i));
    }
    if (cars_[i].active && a != kGas && a != kBrake) {
      throw ContractError("tj step: invalid action " + std::to_string(a) + " for car slot " + std::to_string(i));
    }
  }
  std::vector<bool> spawned(cars_.size(), false);
  if (done_) return make_timestep(std::vector<double>(cars_.size(), 0.0), std::move(spawned));

  std::vector<bool> acted(cars_.size(), false);
  std::vector<bool> free_at_start(cars_.size(), false);
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    Car& car = cars_[i];
    free_at_start[i] = !car.active;
    if (!car.active) continue;
    acted[i] = true;
    car.previous_action = actions[i];
    car.tau += 1;
    if (actions[i] == kGas) {
      const auto& cells = routes_[static_cast<std::size_t>(car.entry)][static_cast<std::size_t>(car.route)].cells;
      car.position += 1;
      if (car.position >= static_cast<int>(cells.size())) car.active = false;
    }
  }

  std::map<Cell, int> occupancy;
  for (const auto& car : cars_) {
    if (car.active) ++occupancy[cell_of(car)];
  }
  std::vector<double> rewards(cars_.size(), 0.0);
  last_collisions_ = 0;
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    if (!acted[i]) continue;
    const Car& car = cars_[i];
    const int hit = car.active && occupancy[cell_of(car)] > 1 ? 1 : 0;
    last_collisions_ += hit;
    rewards[i] = tj_reward(hit, car.tau, config_.r_coll, config_.r_time);
  }
  if (last_collisions_ > 0) collided_ = true;

  ++steps_;
  done_ = steps_ >= max_steps_;
  if (!done_) spawn(free_at_start, spawned);
  return make_timestep(std::move(rewards), std::move(spawned));
}

envkit::TimeStep TrafficJunction::make_timestep(std::vector<double> rewards, std::vector<bool> spawned) const {
  const auto n = static_cast<Eigen::Index>(cars_.size());
  envkit::TimeStep ts;
  ts.observations = Eigen::MatrixXd::Zero(n, observation_dim());
  std::map<Cell, int> occupancy;
  for (const auto& car : cars_) {
    if (car.active) ++occupancy[cell_of(car)];
  }
  const int loc_offset = kActionCount + spec_.routes_per_entry;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Car& car = cars_[static_cast<std::size_t>(i)];
    if (!car.active) continue;
    const Cell c = cell_of(car);
    ts.observations(i, car.previous_action) = 1.0;
    ts.observations(i, kActionCount + car.route) = 1.0;
    ts.observations(i, loc_offset + c.row * spec_.dim + c.col) = 1.0;
    ts.observations(i, loc_offset + static_cast<Eigen::Index>(car_class_)) = occupancy.at(c);
  }
  ts.rewards = std::move(rewards);
  ts.alive.resize(cars_.size());
  ts.done.resize(cars_.size());
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    ts.alive[i] = cars_[i].active;
    ts.done[i] = done_ || !cars_[i].active;
  }
  ts.controllable = ts.alive;
  ts.spawned = std::move(spawned);
  ts.episode_done = done_;
  ts.info["collision"] = last_collisions_ > 0 ? 1.0 : 0.0;
  ts.info["collisions"] = last_collisions_;
  ts.info["cars"] = active_count();
  return ts;
}

std::string TrafficJunction::trace_state() const {
  std::ostringstream os;
  os << "{\"cars\":[";
  bool first = true;
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    const Car& car = cars_[i];
    if (!car.active) continue;
    const Cell c = cell_of(car);
    os << (first ? "" : ",") << "{\"slot\":" << i << ",\"entry\":" << car.entry << ",\"route\":" << car.route
       << ",\"cell\":[" << c.row << "," << c.col << "],\"tau\":" << car.tau << "}";
    first = false;
  }
  os << "],\"p_arrive\":" << config_.p_arrive << ",\"collided\":" << (collided_ ? "true" : "false") << "}";
  return os.str();
}

}  // namespace ic3net::tj
