#pragma once

#include <array>
#include <string>
#include <vector>

#include "ic3net/envkit/environment.hpp"
#include "ic3net/envkit/rng.hpp"
#include "ic3net/envkit/vocab.hpp"

namespace ic3net::pp {

/// Cooperation regime; the value is the exponent lambda on the on-prey count.
enum class Mode { kCompetitive = -1, kMixed = 0, kCooperative = 1 };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

enum Move : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kMoveCount = 5;

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Config {
  int grid = 5;
  int predators = 3;
  int vision = 1;
  Mode mode = Mode::kMixed;
  double r_explore = -0.05;
  double r_prey = 0.05;
  int max_steps = 20;
  bool trainable_prey = false;
  double prey_alive_reward = 0.05;

  /// Grid sizes used for reproduction: (5, n=3, 20), (10, n=5, 40), (20, n=10, 80).
  static Config standard(int grid, Mode mode = Mode::kMixed);
  /// Throws ConfigError unless (grid, max_steps) is one of the standard pairs.
  void validate() const;

  friend bool operator==(const Config&, const Config&) = default;
};

/// Per-step reward of a predator. Not yet on prey: r_explore. On prey:
/// r_prey (mixed), r_prey * n_on_prey (cooperative), r_prey / n_on_prey
/// (competitive).
double pp_reward(Mode mode, bool reached, int n_on_prey, double r_explore = -0.05, double r_prey = 0.05);

/// Reward of the trainable prey: paid only while nobody sits on it.
double pp_prey_reward(int n_on_prey, double alive_reward = 0.05);

class PredatorPrey final : public envkit::Environment {
 public:
  explicit PredatorPrey(Config config);

  envkit::TimeStep reset(std::uint64_t seed) override;
  /// Deterministic placement, used by tests and the enumeration oracle.
  envkit::TimeStep reset_layout(const std::vector<Cell>& predators, Cell prey);
  envkit::TimeStep step(std::span<const int> actions) override;

  int action_count() const override { return kMoveCount; }
  int observation_dim() const override;
  int agent_count() const override { return config_.predators + (config_.trainable_prey ? 1 : 0); }
  int steps() const override { return steps_; }
  bool success() const override;
  std::string population(int agent) const override;
  std::string trace_state() const override;

  const Config& config() const { return config_; }
  const std::vector<Cell>& predator_cells() const { return predators_; }
  Cell prey_cell() const { return prey_; }
  const std::vector<bool>& reached() const { return reached_; }
  int on_prey() const;
  const envkit::Vocab& vocab() const { return vocab_; }
  /// Size of one cell's multi-hot vector (locations + predator + prey).
  int cell_dim() const { return static_cast<int>(vocab_.size()); }

 private:
  envkit::TimeStep make_timestep(std::vector<double> rewards) const;
  void observe_into(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out, Cell center) const;
  void update_reached();

  Config config_;
  envkit::Vocab vocab_;
  std::size_t predator_class_ = 0;
  std::size_t prey_class_ = 0;
  std::vector<Cell> predators_;
  Cell prey_;
  std::vector<bool> reached_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace ic3net::pp
