#pragma once

#include <string>
#include <vector>

#include "ic3net/envkit/environment.hpp"
#include "ic3net/envkit/rng.hpp"
#include "ic3net/envkit/vocab.hpp"

namespace ic3net::tj {

enum class Level { kEasy, kMedium, kHard };

std::string to_string(Level level);
Level level_from_string(const std::string& s);

enum Action : int { kGas = 0, kBrake = 1 };
inline constexpr int kActionCount = 2;

/// Static description of a difficulty level.
struct LevelSpec {
  Level level = Level::kEasy;
  int dim = 7;
  double p_arrive_start = 0.1;
  double p_arrive_end = 0.3;
  int n_total = 5;
  int arrival_points = 2;
  int routes_per_entry = 1;
  bool two_way = false;
  int junctions = 1;
  int max_steps = 20;
};

LevelSpec level_spec(Level level);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct Route {
  int entry = 0;
  int turns = 0;
  std::vector<Cell> cells;
};

/// Routes for every entry point, outer index = entry. Each entry gets the
/// straight path and turning paths (at most two turns, never ending in the
/// direction opposite to the start), ordered by (turns, length, cells) and
/// truncated to the level's routes-per-entry count.
std::vector<std::vector<Route>> build_routes(Level level);

/// Cells covered by any lane of the level.
std::vector<Cell> road_cells(Level level);

/// Plain-text route table: one line per route, "entry route: r,c r,c ...".
std::string format_routes(const std::vector<std::vector<Route>>& routes);

/// r_coll * collided + r_time * tau. Requires tau >= 1.
double tj_reward(int collided, int tau, double r_coll = -10.0, double r_time = -0.01);

/// Arrival-probability curriculum: constant at start until `hold_until`,
/// linear up to `ramp_until`, constant at end afterwards.
struct Curriculum {
  int hold_until = 250;
  int ramp_until = 1250;

  /// The same curve compressed by `factor` (2.5 maps 250/1250 to 100/500).
  Curriculum compressed(double factor) const;
  friend bool operator==(const Curriculum&, const Curriculum&) = default;
};

double curriculum_rate(int epoch, Level level, const Curriculum& schedule = {});

struct Config {
  Level level = Level::kEasy;
  /// Zero selects the level default.
  int n_total = 0;
  int max_steps = 0;
  double p_arrive = 0.1;
  double r_coll = -10.0;
  double r_time = -0.01;

  friend bool operator==(const Config&, const Config&) = default;
};

class TrafficJunction final : public envkit::Environment {
 public:
  explicit TrafficJunction(Config config);

  envkit::TimeStep reset(std::uint64_t seed) override;
  envkit::TimeStep step(std::span<const int> actions) override;

  int action_count() const override { return kActionCount; }
  int observation_dim() const override;
  int agent_count() const override { return n_total_; }
  int steps() const override { return steps_; }
  /// True while no collision has happened in the episode.
  bool success() const override { return !collided_; }
  std::string population(int) const override { return "car"; }
  std::string trace_state() const override;

  void set_p_arrive(double p) { config_.p_arrive = p; }
  double p_arrive() const { return config_.p_arrive; }
  const LevelSpec& spec() const { return spec_; }
  const std::vector<std::vector<Route>>& routes() const { return routes_; }
  int active_count() const;

  struct Car {
    bool active = false;
    int entry = 0;
    int route = 0;
    int position = 0;  // index into the route's cells
    int tau = 0;       // steps spent in the grid
    int previous_action = kBrake;
  };
  const std::vector<Car>& cars() const { return cars_; }
  Cell cell_of(const Car& car) const;

  /// Places a car directly; tests use it to build collision scenarios.
  void place_car(int slot, int entry, int route, int position, int tau = 0);

 private:
  void spawn(const std::vector<bool>& free_at_start, std::vector<bool>& spawned);
  envkit::TimeStep make_timestep(std::vector<double> rewards, std::vector<bool> spawned) const;

  Config config_;
  LevelSpec spec_;
  int n_total_ = 0;
  int max_steps_ = 0;
  std::vector<std::vector<Route>> routes_;
  envkit::Vocab vocab_;
  std::size_t car_class_ = 0;
  std::vector<Car> cars_;
  envkit::Rng rng_;
  int steps_ = 0;
  bool collided_ = false;
  bool done_ = true;
  int last_collisions_ = 0;
};

}  // namespace ic3net::tj
