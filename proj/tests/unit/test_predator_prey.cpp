#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ic3net/env/predator_prey.hpp"
#include "ic3net/errors.hpp"
#include "ic3net/train/rollout.hpp"

namespace ic3net::pp {
namespace {

std::vector<int> all(int n, int a) { return std::vector<int>(static_cast<std::size_t>(n), a); }

TEST(PredatorPreyConfig, StandardSizes) {
  EXPECT_EQ(Config::standard(5).predators, 3);
  EXPECT_EQ(Config::standard(10).predators, 5);
  EXPECT_EQ(Config::standard(20).predators, 10);
  EXPECT_EQ(Config::standard(10).max_steps, 40);
  EXPECT_EQ(Config::standard(20).max_steps, 80);
  Config bad = Config::standard(5);
  bad.max_steps = 40;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(PredatorPrey{bad}, ConfigError);
}

// Reward table written out per mode: rows are n_on_prey = 1..10.
TEST(PredatorPreyReward, MatchesTableOracle) {
  const double coop[] = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  for (int n_agents = 1; n_agents <= 10; ++n_agents) {
    for (int n = 0; n <= n_agents; ++n) {
      for (Mode m : {Mode::kCompetitive, Mode::kMixed, Mode::kCooperative}) {
        EXPECT_EQ(pp_reward(m, false, n), -0.05);
        if (n == 0) {
          EXPECT_THROW(pp_reward(m, true, n), ContractError);
          continue;
        }
        double expected = 0.05;
        if (m == Mode::kCooperative) expected = coop[n - 1];
        if (m == Mode::kCompetitive) expected = 1.0 / (20.0 * n);
        EXPECT_NEAR(pp_reward(m, true, n), expected, 1e-15) << to_string(m) << " n=" << n;
      }
    }
  }
}

TEST(PredatorPreyReward, Examples) {
  EXPECT_DOUBLE_EQ(pp_reward(Mode::kMixed, false, 0), -0.05);
  EXPECT_NEAR(pp_reward(Mode::kCooperative, true, 2), 0.10, 1e-15);
  EXPECT_NEAR(pp_reward(Mode::kCompetitive, true, 2), 0.025, 1e-15);
  EXPECT_DOUBLE_EQ(pp_reward(Mode::kMixed, true, 3), 0.05);
  EXPECT_DOUBLE_EQ(pp_prey_reward(0), 0.05);
  EXPECT_DOUBLE_EQ(pp_prey_reward(1), 0.0);
}

TEST(PredatorPrey, ObservationDimension) {
  PredatorPrey env(Config::standard(5));
  EXPECT_EQ(env.cell_dim(), 27);
  EXPECT_EQ(env.observation_dim(), 243);
  const auto ts = env.reset(3);
  EXPECT_EQ(ts.observations.rows(), 3);
  EXPECT_EQ(ts.observations.cols(), 243);
  EXPECT_EQ(PredatorPrey(Config::standard(10)).observation_dim(), 9 * 102);
}

TEST(PredatorPrey, ObservationWindowContents) {
  PredatorPrey env(Config::standard(5));
  const auto ts = env.reset_layout({{2, 2}, {0, 0}, {2, 2}}, {2, 3});
  const int d = 27;
  const auto row = ts.observations.row(0);
  // center cell (window index 4): location (2,2) and two predators
  EXPECT_EQ(row(4 * d + 12), 1.0);
  EXPECT_EQ(row(4 * d + 25), 2.0);
  // east neighbour (window index 5): location (2,3) and the prey
  EXPECT_EQ(row(5 * d + 13), 1.0);
  EXPECT_EQ(row(5 * d + 26), 1.0);
  EXPECT_EQ(row.sum(), 9.0 + 2.0 + 1.0);
  // predator in the corner sees only 4 cells of the grid
  const auto corner = ts.observations.row(1);
  EXPECT_EQ(corner.segment(0, 4 * d).sum(), 0.0);
  EXPECT_EQ(corner.sum(), 4.0 + 1.0);
}

TEST(PredatorPrey, SameSeedSameLayout) {
  PredatorPrey a(Config::standard(10)), b(Config::standard(10));
  a.reset(42);
  b.reset(42);
  EXPECT_EQ(a.predator_cells(), b.predator_cells());
  EXPECT_EQ(a.prey_cell(), b.prey_cell());
}

TEST(PredatorPrey, SpawnOnPreyIsReached) {
  PredatorPrey env(Config::standard(5));
  const auto ts = env.reset_layout({{1, 1}, {0, 0}, {4, 4}}, {1, 1});
  EXPECT_TRUE(env.reached()[0]);
  EXPECT_FALSE(ts.controllable[0]);
  EXPECT_TRUE(ts.controllable[1]);
  EXPECT_FALSE(ts.episode_done);
}

TEST(PredatorPrey, BorderClamp) {
  PredatorPrey env(Config::standard(5));
  env.reset_layout({{0, 0}, {0, 0}, {4, 4}}, {2, 2});
  env.step(std::vector<int>{kLeft, kUp, kDown});
  EXPECT_EQ(env.predator_cells()[0], (Cell{0, 0}));
  EXPECT_EQ(env.predator_cells()[1], (Cell{0, 0}));
  EXPECT_EQ(env.predator_cells()[2], (Cell{4, 4}));
}

TEST(PredatorPrey, MovingOntoPreyReaches) {
  PredatorPrey env(Config::standard(5));
  env.reset_layout({{2, 1}, {0, 0}, {4, 4}}, {2, 2});
  const auto ts = env.step(std::vector<int>{kRight, kStay, kStay});
  EXPECT_TRUE(env.reached()[0]);
  EXPECT_DOUBLE_EQ(ts.rewards[0], 0.05);
  EXPECT_DOUBLE_EQ(ts.rewards[1], -0.05);
  EXPECT_EQ(ts.info.at("n_on_prey"), 1.0);
  // reached predator ignores further moves
  env.step(std::vector<int>{kUp, kStay, kStay});
  EXPECT_EQ(env.predator_cells()[0], (Cell{2, 2}));
}

TEST(PredatorPrey, InvalidActionIsContractError) {
  PredatorPrey env(Config::standard(5));
  env.reset(1);
  EXPECT_THROW(env.step(std::vector<int>{0, 5, 0}), ContractError);
  EXPECT_THROW(env.step(std::vector<int>{0, 0}), ContractError);
}

TEST(PredatorPrey, HandSimulatedTrace) {
  PredatorPrey env(Config::standard(5));
  const std::vector<std::vector<int>> script{{1, 0, 3}, {1, 2, 3}, {3, 0, 0}, {3, 2, 4}};
  std::size_t k = 0;
  std::ostringstream trace;
  const auto first = env.reset_layout({{0, 0}, {4, 4}, {2, 0}}, {2, 2});
  const auto traj = train::run_scripted_from(
      env, first, [&](const envkit::Environment&, const envkit::TimeStep&) { return script.at(k++); }, &trace);
  std::ifstream fixture(std::string(IC3NET_DATA_DIR) + "/pp_trace_5x5_mixed.jsonl");
  std::stringstream expected;
  expected << fixture.rdbuf();
  EXPECT_EQ(trace.str(), expected.str());
  EXPECT_EQ(traj.env_steps, 4);
  EXPECT_TRUE(traj.success);
}

TEST(PredatorPrey, CooperativeRewardsScaleWithCount) {
  PredatorPrey env(Config::standard(5, Mode::kCooperative));
  env.reset_layout({{2, 1}, {2, 3}, {0, 0}}, {2, 2});
  const auto ts = env.step(std::vector<int>{kRight, kLeft, kStay});
  EXPECT_NEAR(ts.rewards[0], 0.10, 1e-15);
  EXPECT_NEAR(ts.rewards[1], 0.10, 1e-15);
  EXPECT_DOUBLE_EQ(ts.rewards[2], -0.05);
}

TEST(PredatorPrey, NoCaptureRunsToMaxSteps) {
  PredatorPrey env(Config::standard(5));
  auto ts = env.reset_layout({{0, 0}, {0, 1}, {1, 0}}, {4, 4});
  double total = 0;
  while (!ts.episode_done) {
    ts = env.step(all(3, kStay));
    total += ts.rewards[0];
  }
  EXPECT_EQ(env.steps(), 20);
  EXPECT_FALSE(env.success());
  EXPECT_NEAR(total, -1.0, 1e-12);
  // stepping a finished episode changes nothing and pays nothing
  ts = env.step(all(3, kUp));
  EXPECT_EQ(env.steps(), 20);
  EXPECT_EQ(ts.rewards, std::vector<double>(3, 0.0));
}

TEST(PredatorPrey, CaptureIsMonotoneAndRewardsBounded) {
  for (Mode mode : {Mode::kMixed, Mode::kCooperative, Mode::kCompetitive}) {
    PredatorPrey env(Config::standard(5, mode));
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      envkit::Rng rng(seed + 1000);
      auto ts = env.reset(seed);
      std::vector<bool> before = env.reached();
      std::vector<double> ret(3, 0.0);
      while (!ts.episode_done) {
        std::vector<int> acts;
        for (int i = 0; i < 3; ++i) acts.push_back(static_cast<int>(rng.below(5)));
        ts = env.step(acts);
        for (std::size_t i = 0; i < 3; ++i) {
          if (before[i]) EXPECT_TRUE(env.reached()[i]);
          if (env.reached()[i]) EXPECT_EQ(env.predator_cells()[i], env.prey_cell());
          ret[i] += ts.rewards[i];
        }
        before = env.reached();
      }
      if (mode == Mode::kMixed) {
        for (double r : ret) {
          EXPECT_GE(r, -0.05 * 20 - 1e-12);
          EXPECT_LE(r, 0.05 * 20 + 1e-12);
        }
      }
    }
  }
}

TEST(PredatorPrey, TrainablePreyNeverMovesAndIsPaidUntilCaught) {
  Config c = Config::standard(5, Mode::kMixed);
  c.trainable_prey = true;
  PredatorPrey env(c);
  EXPECT_EQ(env.agent_count(), 4);
  EXPECT_EQ(env.population(3), "prey");
  EXPECT_EQ(env.population(0), "predator");
  auto ts = env.reset_layout({{0, 0}, {0, 1}, {2, 1}}, {2, 2});
  EXPECT_FALSE(ts.controllable[3]);
  EXPECT_TRUE(ts.alive[3]);
  EXPECT_GT(ts.observations.row(3).sum(), 0.0);
  ts = env.step(std::vector<int>{kStay, kStay, kStay, kUp});
  EXPECT_EQ(env.prey_cell(), (Cell{2, 2}));
  EXPECT_DOUBLE_EQ(ts.rewards[3], 0.05);
  ts = env.step(std::vector<int>{kStay, kStay, kRight, kLeft});
  EXPECT_EQ(env.prey_cell(), (Cell{2, 2}));
  EXPECT_DOUBLE_EQ(ts.rewards[3], 0.0);
}

}  // namespace
}  // namespace ic3net::pp
