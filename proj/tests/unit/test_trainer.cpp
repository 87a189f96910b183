#include <gtest/gtest.h>

#include <cstdlib>

#include "ic3net/env/predator_prey.hpp"
#include "ic3net/env/traffic_junction.hpp"
#include "ic3net/errors.hpp"
#include "ic3net/train/trainer.hpp"
#include "oracles.hpp"

namespace ic3net::train {
namespace {

using policy::GateMode;
using policy::ModelKind;
using policy::ModelVariant;
using policy::RewardMode;
using Mat = diffnet::Matrix<double>;

EnvSpec pp_spec(int grid = 5) {
  EnvSpec s;
  s.kind = EnvSpec::Kind::kPredatorPrey;
  s.pp = pp::Config::standard(grid);
  return s;
}

EnvSpec tj_spec(double p_arrive = 0.3) {
  EnvSpec s;
  s.kind = EnvSpec::Kind::kTrafficJunction;
  s.tj.level = tj::Level::kEasy;
  s.tj.p_arrive = p_arrive;
  s.curriculum = false;
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 2;
  c.updates_per_epoch = 2;
  c.batch_threshold = 40;
  c.shards = 4;
  c.workers = 1;
  c.hidden = 8;
  c.seed = 7;
  return c;
}

Mask full_mask(int steps, int agents) {
  return Mask(static_cast<std::size_t>(steps), std::vector<bool>(static_cast<std::size_t>(agents), true));
}

TEST(Returns, UndiscountedSuffixSums) {
  Eigen::MatrixXd r(3, 2);
  r << 1, 0, 2, 1, 3, 2;
  const auto g = compute_returns(r, full_mask(3, 2), 1.0, RewardMode::kIndividual);
  Eigen::MatrixXd want(3, 2);
  want << 6, 3, 5, 3, 3, 2;
  EXPECT_EQ(g, want);
}

TEST(Returns, DiscountAndBreaks) {
  Eigen::MatrixXd r(4, 1);
  r << 1, 1, 1, 1;
  Mask alive{{true}, {true}, {false}, {true}};
  const auto g = compute_returns(r, alive, 0.5, RewardMode::kIndividual);
  EXPECT_DOUBLE_EQ(g(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(g(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(g(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(g(3, 0), 1.0);
  EXPECT_THROW(compute_returns(r, full_mask(3, 1), 1.0, RewardMode::kIndividual), ContractError);
}

TEST(Returns, GlobalAverageOverAliveAgents) {
  Eigen::MatrixXd r(1, 3);
  r << 1, 2, 100;
  Mask alive{{true, true, false}};
  const auto g = compute_returns(r, alive, 1.0, RewardMode::kGlobalAverage);
  EXPECT_DOUBLE_EQ(g(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(g(0, 1), 1.5);
  EXPECT_DOUBLE_EQ(g(0, 2), 0.0);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  for (auto variant : {ModelVariant::make(ModelKind::kIc3Net), ModelVariant::make(ModelKind::kCommNet),
                       ModelVariant::make(ModelKind::kIc), ModelVariant::make(ModelKind::kIric)}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto check = testing::case_reinforce_loss(seed, variant);
      EXPECT_LT(check.max_rel_err, 1e-4) << variant.label() << " seed " << seed << " at " << check.worst;
    }
  }
}

std::vector<Mat> loss_gradient(const Model& model, const ModelVariant& variant, const Trajectory& traj,
                               const TrainConfig& config) {
  diffnet::Tape<double> tape;
  const auto loss = build_loss(tape, model, variant, {traj}, config);
  tape.backward(loss);
  auto g = model.params.zero_like();
  tape.accumulate_into(std::span<Mat>(g));
  return g;
}

TEST(Loss, ZeroAdvantageGivesZeroGradient) {
  Model model = policy::build_model<double>(6, 3, 5, 1);
  for (auto& p : model.params) {
    if (p.name.starts_with("value.")) p.value.setZero();
  }
  auto traj = testing::scripted_episode(3, 6, 3);
  traj.rewards.setZero();
  TrainConfig config;
  for (const auto& g : loss_gradient(model, ModelVariant::make(ModelKind::kIc3Net), traj, config)) {
    EXPECT_TRUE((g.array() == 0.0).all());
  }
}

TEST(Loss, FixedGatesLeaveGateHeadUntouched) {
  const Model model = policy::build_model<double>(6, 3, 5, 1);
  const auto traj = testing::scripted_episode(4, 6, 3);
  TrainConfig config;
  const std::vector<std::string> gate_params{"gate.hidden.weight", "gate.hidden.bias", "gate.out.weight",
                                             "gate.out.bias"};
  for (auto variant : {ModelVariant::ic3net(GateMode::kFixedOpen), ModelVariant::make(ModelKind::kIric)}) {
    const auto g = loss_gradient(model, variant, traj, config);
    for (const auto& name : gate_params) {
      EXPECT_TRUE((g[model.params.slot_of(name)].array() == 0.0).all()) << variant.label() << " " << name;
    }
  }
  const auto learned = loss_gradient(model, ModelVariant::make(ModelKind::kIc3Net), traj, config);
  EXPECT_GT(learned[model.params.slot_of("gate.out.weight")].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Loss, GateChoicesOnlyMoveGateAndCommTerms) {
  const Model model = policy::build_model<double>(6, 3, 5, 1);
  auto traj = testing::scripted_episode(5, 6, 3);
  TrainConfig config;
  const auto variant = ModelVariant::ic3net(GateMode::kFixedClosed);
  const auto before = loss_gradient(model, variant, traj, config);
  for (auto& row : traj.gates) {
    for (auto& g : row) g = 1 - g;
  }
  const auto after = loss_gradient(model, variant, traj, config);
  for (std::size_t p = 0; p < before.size(); ++p) EXPECT_EQ(before[p], after[p]) << model.params[p].name;
}

TEST(Loss, IndividualEqualsGlobalWhenRewardsAreShared) {
  const Model model = policy::build_model<double>(6, 3, 5, 1);
  auto traj = testing::scripted_episode(6, 6, 3);
  for (auto& row : traj.alive) row.assign(3, true);
  for (int t = 0; t < traj.length(); ++t) traj.rewards.row(t).setConstant(0.1 * (t + 1));
  TrainConfig config;
  ModelVariant individual{ModelKind::kCommNet, GateMode::kFixedOpen, RewardMode::kIndividual};
  ModelVariant global{ModelKind::kCommNet, GateMode::kFixedOpen, RewardMode::kGlobalAverage};
  const auto a = loss_gradient(model, individual, traj, config);
  const auto b = loss_gradient(model, global, traj, config);
  for (std::size_t p = 0; p < a.size(); ++p) EXPECT_LE((a[p] - b[p]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Collect, QuotaAndEpisodeCount) {
  const auto spec = pp_spec();
  const Model model = policy::build_model<double>(243, 5, 16, 3);
  const EnvFactory make = [&] { return spec.make(0); };
  const auto shard = collect_shard(model, ModelVariant::make(ModelKind::kIc3Net), make, {11, 0, 500});
  EXPECT_GE(shard.env_steps, 500);
  EXPECT_GE(shard.episodes.size(), 25u);
  int sum = 0;
  for (const auto& ep : shard.episodes) sum += std::max(ep.env_steps, 1);
  EXPECT_EQ(sum, shard.env_steps);
  EXPECT_LT(shard.env_steps - std::max(shard.episodes.back().env_steps, 1), 500);
}

TEST(Collect, SplittingShardsKeepsGradient) {
  const auto spec = tj_spec();
  const Model model = policy::build_model<double>(53, 2, 8, 3);
  const EnvFactory make = [&] { return spec.make(0); };
  const auto variant = ModelVariant::make(ModelKind::kIc3Net);
  TrainConfig config;
  const auto first = collect_shard(model, variant, make, {99, 0, 40});
  ASSERT_EQ(first.episodes.size(), 2u);
  const auto second = collect_shard(model, variant, make, {99, 2, 40});
  const auto whole = collect_shard(model, variant, make, {99, 0, 80});
  ASSERT_EQ(whole.episodes.size(), 4u);
  const auto split = batch_gradient(model, variant, {first, second}, config);
  const auto joined = batch_gradient(model, variant, {whole}, config);
  for (std::size_t p = 0; p < split.size(); ++p) {
    const double scale = std::max(1.0, joined[p].cwiseAbs().maxCoeff());
    EXPECT_LE((split[p] - joined[p]).cwiseAbs().maxCoeff() / scale, 1e-9) << model.params[p].name;
  }
}

TEST(Train, WorkerCountDoesNotChangeResults) {
  auto config = small_config();
  const auto spec = pp_spec();
  const auto variant = ModelVariant::make(ModelKind::kIc3Net);
  const auto reference = train(config, variant, spec);
  ASSERT_EQ(reference.history.size(), 2u);
  for (int workers : {2, 4}) {
    config.workers = workers;
    const auto other = train(config, variant, spec);
    EXPECT_TRUE(testing::same_history(other.history, reference.history)) << workers;
    for (std::size_t p = 0; p < reference.model.params.size(); ++p) {
      EXPECT_EQ(other.model.params[p].value, reference.model.params[p].value) << workers;
    }
  }
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  auto config = small_config();
  config.epochs = 0;
  const auto spec = pp_spec();
  const auto result = train(config, ModelVariant::make(ModelKind::kCommNet), spec);
  EXPECT_TRUE(result.history.empty());
  const auto init = initial_model(config, spec);
  for (std::size_t p = 0; p < init.params.size(); ++p) EXPECT_EQ(result.model.params[p].value, init.params[p].value);
}

TEST(Train, FollowsArrivalCurriculum) {
  auto config = small_config();
  config.epochs = 5;
  config.updates_per_epoch = 1;
  config.shards = 2;
  auto spec = tj_spec();
  spec.curriculum = true;
  spec.schedule = {1, 3};
  const auto result = train(config, ModelVariant::make(ModelKind::kIc), spec);
  ASSERT_EQ(result.history.size(), 5u);
  for (const auto& m : result.history) {
    EXPECT_DOUBLE_EQ(m.p_arrive, tj::curriculum_rate(m.epoch, tj::Level::kEasy, spec.schedule));
    EXPECT_DOUBLE_EQ(m.avg_steps, 20.0);
  }
  const auto pp_result = train(small_config(), ModelVariant::make(ModelKind::kIc), pp_spec());
  EXPECT_TRUE(std::isnan(pp_result.history[0].p_arrive));
}

TEST(Train, InvalidConfigIsRejected) {
  auto config = small_config();
  config.lr = 0.0;
  EXPECT_THROW(train(config, ModelVariant::make(ModelKind::kIc), pp_spec()), ConfigError);
}

TEST(Parallel, FailureNamesLowestIndex) {
  try {
    parallel_for(6, 3, [](int i) {
      if (i == 2 || i == 4) throw std::runtime_error("boom " + std::to_string(i));
    });
    FAIL() << "expected CollectionError";
  } catch (const CollectionError& e) {
    EXPECT_EQ(e.worker(), 2);
    EXPECT_NE(std::string(e.what()).find("boom 2"), std::string::npos);
  }
  EXPECT_THROW(parallel_for(3, 1, [](int i) {
                 if (i == 1) throw std::runtime_error("x");
               }),
               CollectionError);
}

TEST(Collect, EnvironmentFailureNamesShard) {
  const auto spec = pp_spec();
  const Model model = policy::build_model<double>(53, 2, 8, 3);  // traffic-junction sized
  const EnvFactory make = [&] { return spec.make(0); };
  try {
    collect_batch(model, ModelVariant::make(ModelKind::kIc), make, {{1, 0, 10}, {2, 0, 10}}, 2);
    FAIL() << "expected CollectionError";
  } catch (const CollectionError& e) {
    EXPECT_EQ(e.worker(), 0);
    EXPECT_NE(std::string(e.what()).find("observation width"), std::string::npos);
  }
}

TEST(Loss, NonFiniteLossIsTrainingError) {
  const Model model = policy::build_model<double>(6, 3, 5, 1);
  ShardBatch shard;
  shard.episodes.push_back(testing::scripted_episode(1, 6, 3));
  shard.episodes.back().rewards(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(shard_gradient(model, ModelVariant::make(ModelKind::kIric), shard, TrainConfig{}), TrainingError);
}

TEST(Evaluate, IndependentOfWorkers) {
  const auto spec = pp_spec();
  const Model model = policy::build_model<double>(243, 5, 8, 3);
  const EnvFactory make = [&] { return spec.make(0); };
  const auto variant = ModelVariant::make(ModelKind::kIc3Net);
  const auto a = evaluate(model, variant, make, 20, 5, 1);
  const auto b = evaluate(model, variant, make, 20, 5, 3);
  EXPECT_EQ(a.steps.mean, b.steps.mean);
  EXPECT_EQ(a.episode_return.mean, b.episode_return.mean);
  EXPECT_EQ(a.mean_gate, b.mean_gate);
}

TEST(Evaluate, MeanStdIsPopulation) {
  const auto s = mean_std({1.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.stddev, 1.0);
}

// Each predator walks a shortest path (rows first) to the prey.
std::vector<int> chase(const envkit::Environment& e, const envkit::TimeStep&) {
  const auto& env = dynamic_cast<const pp::PredatorPrey&>(e);
  const pp::Cell prey = env.prey_cell();
  std::vector<int> out;
  for (const auto& c : env.predator_cells()) {
    if (c.row < prey.row) out.push_back(pp::kDown);
    else if (c.row > prey.row) out.push_back(pp::kUp);
    else if (c.col < prey.col) out.push_back(pp::kRight);
    else if (c.col > prey.col) out.push_back(pp::kLeft);
    else out.push_back(pp::kStay);
  }
  return out;
}

// Expected capture time over uniform layouts: the largest Manhattan distance.
TEST(Evaluate, ScriptedChaseMatchesEnumeration) {
  const int G = 5;
  double oracle = 0.0;
  for (int a = 0; a < G * G; ++a) {
    for (int b = 0; b < G * G; ++b) {
      for (int c = 0; c < G * G; ++c) {
        for (int p = 0; p < G * G; ++p) {
          int worst = 0;
          for (int q : {a, b, c}) worst = std::max(worst, std::abs(q / G - p / G) + std::abs(q % G - p % G));
          oracle += worst;
        }
      }
    }
  }
  oracle /= std::pow(G * G, 4);

  pp::PredatorPrey env(pp::Config::standard(G));
  double simulated = 0.0;
  for (int a = 0; a < G * G; ++a) {
    for (int b = 0; b < G * G; ++b) {
      for (int c = 0; c < G * G; ++c) {
        for (int p = 0; p < G * G; ++p) {
          auto first = env.reset_layout({{a / G, a % G}, {b / G, b % G}, {c / G, c % G}}, {p / G, p % G});
          simulated += run_scripted_from(env, std::move(first), chase).env_steps;
        }
      }
    }
  }
  simulated /= std::pow(G * G, 4);
  EXPECT_NEAR(simulated, oracle, 1e-12);

  const auto spec = pp_spec(G);
  const auto sampled = evaluate_scripted(chase, [&] { return spec.make(0); }, 4000, 3);
  EXPECT_EQ(sampled.success_rate, 100.0);
  EXPECT_NEAR(sampled.steps.mean, oracle, 4.0 * sampled.steps.stddev / std::sqrt(4000.0));
}

}  // namespace
}  // namespace ic3net::train
