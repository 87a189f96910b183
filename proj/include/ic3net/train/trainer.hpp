#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "ic3net/diffnet/rmsprop.hpp"
#include "ic3net/train/env_spec.hpp"
#include "ic3net/train/rollout.hpp"

namespace ic3net::train {

struct TrainConfig {
  int epochs = 1000;
  int updates_per_epoch = 10;
  int batch_threshold = 500;  // environment steps per shard per update
  int shards = 16;            // logical rollout workers; fixes the batch composition
  int workers = 16;           // threads executing the shards; never changes results
  double lr = 0.003;
  double rmsprop_decay = 0.97;
  double rmsprop_epsilon = 1e-6;
  double value_coef = 0.05;
  double gamma = 1.0;
  double entropy_coef = 0.0;
  std::uint64_t seed = 1;
  int hidden = 128;
  bool skip = true;

  void validate() const;
  diffnet::RmsPropConfig optimizer() const { return {lr, rmsprop_decay, rmsprop_epsilon}; }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Episodes gathered by one shard: consecutive episode indices starting at
/// `first_episode`, run until at least `step_quota` environment steps.
struct ShardSpec {
  std::uint64_t seed = 0;
  int first_episode = 0;
  int step_quota = 500;
};

struct ShardBatch {
  ShardSpec spec;
  std::vector<Trajectory> episodes;
  int env_steps = 0;
};

using Batch = std::vector<ShardBatch>;

/// Environment seed and policy stream of episode `index` within a shard.
std::uint64_t episode_env_seed(std::uint64_t shard_seed, int index);
envkit::Rng episode_rng(std::uint64_t shard_seed, int index);

/// Shard seed for (epoch, update, shard) under a training seed.
std::uint64_t shard_seed(std::uint64_t seed, int epoch, int update, int shard);

ShardBatch collect_shard(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env,
                         const ShardSpec& spec);

/// Runs every shard (in parallel over `workers` threads) with SAMPLE-mode
/// actions. Output order follows `specs`, independent of scheduling.
Batch collect_batch(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env,
                    const std::vector<ShardSpec>& specs, int workers);

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy_sum = 0.0;
  double entropy_count = 0.0;
  double gate_sum = 0.0;
  double gate_count = 0.0;
};

/// Re-feeds recorded episodes through the policy on `tape` (replaying the
/// sampled actions and gates) and returns the scalar REINFORCE loss
///   -sum (log pi(a) + log f^g(g)) * (R - V) + value_coef * sum (R - V)^2
///   - entropy_coef * sum H(pi)
/// with the advantage held constant in the policy term. Gate terms appear only
/// for learned gates; action terms only where the action was under the
/// agent's control.
diffnet::Tensor<double> build_loss(diffnet::Tape<double>& tape, const Model& model, const policy::ModelVariant& variant,
                                   const std::vector<Trajectory>& episodes, const TrainConfig& config,
                                   LossTerms* terms = nullptr);

/// Gradient of one shard's loss, one matrix per parameter slot.
std::vector<diffnet::Matrix<double>> shard_gradient(const Model& model, const policy::ModelVariant& variant,
                                                    const ShardBatch& shard, const TrainConfig& config,
                                                    LossTerms* terms = nullptr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_entropy = 0.0;
  double mean_gate = 0.0;
};

/// Pooled gradient of a batch, summed over shards in shard order (so the
/// result does not depend on the worker count).
std::vector<diffnet::Matrix<double>> batch_gradient(const Model& model, const policy::ModelVariant& variant,
                                                    const Batch& batch, const TrainConfig& config,
                                                    UpdateStats* stats = nullptr);

/// batch_gradient followed by one optimizer step.
UpdateStats reinforce_update(Model& model, diffnet::RmsProp<double>& optimizer, const policy::ModelVariant& variant,
                             const Batch& batch, const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double mean_reward = 0.0;
  double avg_steps = 0.0;
  double success_rate = 0.0;
  double mean_gate = 0.0;
  double prey_gate = std::numeric_limits<double>::quiet_NaN();
  double p_arrive = std::numeric_limits<double>::quiet_NaN();
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int episodes = 0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> history;
};

/// Called after every epoch with the metrics and the current parameters.
using EpochCallback = std::function<void(const EpochMetrics&, const Model&, const diffnet::RmsProp<double>&)>;

Model initial_model(const TrainConfig& config, const EnvSpec& env);

TrainResult train(const TrainConfig& config, const policy::ModelVariant& variant, const EnvSpec& env,
                  const EpochCallback& on_epoch = {});

/// Continues training an existing model from `first_epoch`.
TrainResult train_from(Model model, diffnet::RmsProp<double> optimizer, int first_epoch, const TrainConfig& config,
                       const policy::ModelVariant& variant, const EnvSpec& env, const EpochCallback& on_epoch = {});

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

Stat mean_std(const std::vector<double>& xs);

struct EvalMetrics {
  int episodes = 0;
  Stat steps;
  double success_rate = 0.0;  // percent
  double mean_gate = 0.0;
  double prey_gate = std::numeric_limits<double>::quiet_NaN();
  Stat episode_return;
};

EvalMetrics aggregate(const std::vector<EpisodeSummary>& episodes);

/// Policy rollouts without learning; episode k uses stream (seed, k).
EvalMetrics evaluate(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env, int episodes,
                     std::uint64_t seed, int workers = 1, policy::SampleMode mode = policy::SampleMode::kSample);

EvalMetrics evaluate_scripted(const Actor& actor, const EnvFactory& make_env, int episodes, std::uint64_t seed);

/// Runs fn(0..count-1) over `workers` threads; exceptions are rethrown as
/// CollectionError naming the failing index.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace ic3net::train
