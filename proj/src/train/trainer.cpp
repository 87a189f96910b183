#include "ic3net/train/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "ic3net/errors.hpp"

namespace ic3net::train {

using diffnet::Matrix;
using diffnet::Tape;
using diffnet::Tensor;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
  if (updates_per_epoch < 1) throw ConfigError("train.updates_per_epoch: must be >= 1");
  if (batch_threshold < 1) throw ConfigError("train.batch_threshold: must be >= 1");
  if (shards < 1) throw ConfigError("train.shards: must be >= 1");
  if (workers < 1) throw ConfigError("train.workers: must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr: must be positive");
  if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) throw ConfigError("train.rmsprop_decay: must lie in [0, 1)");
  if (!(rmsprop_epsilon > 0.0)) throw ConfigError("train.rmsprop_epsilon: must be positive");
  if (value_coef < 0.0) throw ConfigError("train.value_coef: must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma: must lie in [0, 1]");
  if (entropy_coef < 0.0) throw ConfigError("train.entropy_coef: must be >= 0");
  if (hidden < 1) throw ConfigError("train.hidden: must be >= 1");
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  std::exception_ptr failure;
  int failed_index = -1;
  std::mutex mu;
  std::atomic<int> next{0};
  auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure || i < failed_index) {
          failure = std::current_exception();
          failed_index = i;
        }
      }
    }
  };
  const int threads = std::min(std::max(workers, 1), std::max(count, 1));
  if (threads <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const CollectionError&) {
      throw;
    } catch (const std::exception& e) {
      throw CollectionError(failed_index, e.what());
    }
  }
}

std::uint64_t episode_env_seed(std::uint64_t shard, int index) {
  return envkit::Rng::stream(shard, {static_cast<std::uint64_t>(index), 0}).next_u64();
}

envkit::Rng episode_rng(std::uint64_t shard, int index) {
  return envkit::Rng::stream(shard, {static_cast<std::uint64_t>(index), 1});
}

std::uint64_t shard_seed(std::uint64_t seed, int epoch, int update, int shard) {
  return envkit::Rng::stream(seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(update),
                                    static_cast<std::uint64_t>(shard)})
      .next_u64();
}

ShardBatch collect_shard(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env,
                         const ShardSpec& spec) {
  ShardBatch out;
  out.spec = spec;
  auto env = make_env();
  for (int k = spec.first_episode; out.env_steps < spec.step_quota; ++k) {
    auto rng = episode_rng(spec.seed, k);
    out.episodes.push_back(
        run_episode(model, variant, *env, episode_env_seed(spec.seed, k), rng, policy::SampleMode::kSample));
    // An episode that ends at reset still costs one step of budget so the loop terminates.
    out.env_steps += std::max(out.episodes.back().env_steps, 1);
  }
  return out;
}

Batch collect_batch(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env,
                    const std::vector<ShardSpec>& specs, int workers) {
  Batch batch(specs.size());
  parallel_for(static_cast<int>(specs.size()), workers, [&](int k) {
    batch[static_cast<std::size_t>(k)] = collect_shard(model, variant, make_env, specs[static_cast<std::size_t>(k)]);
  });
  return batch;
}

Tensor<double> build_loss(Tape<double>& tape, const Model& model, const policy::ModelVariant& variant,
                          const std::vector<Trajectory>& episodes, const TrainConfig& config, LossTerms* terms) {
  using Mat = Matrix<double>;
  const bool learned_gate = variant.gate_mode == policy::GateMode::kLearned;
  Tensor<double> loss = tape.constant(1, 1, 0.0);
  envkit::Rng unused(0);
  LossTerms local;

  for (const auto& traj : episodes) {
    if (traj.length() == 0) continue;
    const Eigen::MatrixXd returns = compute_returns(traj.rewards, traj.alive, config.gamma, variant.reward_mode);
    const auto n = static_cast<Eigen::Index>(traj.agents);
    auto state = policy::init_states(tape, traj.agents, model.shape.hidden);

    for (int t = 0; t < traj.length(); ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const policy::Replay replay{traj.actions[ts], traj.gates[ts]};
      auto out = policy::policy_step(tape, model, variant, traj.observations[ts], traj.alive[ts], traj.spawned[ts],
                                     state, unused, policy::SampleMode::kSample, &replay);

      Mat w_action = Mat::Zero(n, 1);
      Mat w_gate = Mat::Zero(n, 1);
      Mat alive = Mat::Zero(n, 1);
      Mat target = Mat::Zero(n, 1);
      Mat control = Mat::Zero(n, model.shape.num_actions);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        if (!traj.alive[ts][ii]) continue;
        const double advantage = returns(t, i) - out.values.value()(i, 0);
        alive(i, 0) = 1.0;
        target(i, 0) = returns(t, i);
        if (traj.controllable[ts][ii]) {
          w_action(i, 0) = -advantage;
          control.row(i).setOnes();
        }
        if (learned_gate) w_gate(i, 0) = -advantage;
        local.gate_sum += traj.gates[ts][ii];
        local.gate_count += 1.0;
      }

      auto step_loss = diffnet::sum(diffnet::mul(out.action_log_probs, tape.constant(w_action)));
      local.policy += step_loss.item();
      if (learned_gate) {
        const auto gate_term = diffnet::sum(diffnet::mul(out.gate_log_probs, tape.constant(w_gate)));
        local.policy += gate_term.item();
        step_loss = diffnet::add(step_loss, gate_term);
      }
      const auto err = diffnet::mul(diffnet::sub(out.values, tape.constant(target)), tape.constant(alive));
      const auto value_loss = diffnet::sum(diffnet::mul(err, err));
      local.value += value_loss.item();
      step_loss = diffnet::add(step_loss, diffnet::scale(value_loss, config.value_coef));

      const auto& logd = out.action_log_dist;
      const Mat plogp = logd.value().array().exp().matrix().cwiseProduct(logd.value());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (control(i, 0) != 0.0) {
          local.entropy_sum -= plogp.row(i).sum();
          local.entropy_count += 1.0;
        }
      }
      if (config.entropy_coef > 0.0) {
        const auto neg_entropy = diffnet::sum(diffnet::mul(tape.constant(control), diffnet::mul(diffnet::exp(logd), logd)));
        step_loss = diffnet::add(step_loss, diffnet::scale(neg_entropy, config.entropy_coef));
      }
      loss = diffnet::add(loss, step_loss);
      state = out.next;
    }
  }
  if (terms) *terms = local;
  return loss;
}

std::vector<Matrix<double>> shard_gradient(const Model& model, const policy::ModelVariant& variant,
                                           const ShardBatch& shard, const TrainConfig& config, LossTerms* terms) {
  Tape<double> tape;
  const auto loss = build_loss(tape, model, variant, shard.episodes, config, terms);
  if (!std::isfinite(loss.item())) {
    throw TrainingError("non-finite loss " + std::to_string(loss.item()) + " over " +
                        std::to_string(shard.episodes.size()) + " episodes (" + std::to_string(shard.env_steps) +
                        " steps)");
  }
  tape.backward(loss);
  auto grads = model.params.zero_like();
  tape.accumulate_into(std::span<Matrix<double>>(grads));
  return grads;
}

std::vector<Matrix<double>> batch_gradient(const Model& model, const policy::ModelVariant& variant, const Batch& batch,
                                           const TrainConfig& config, UpdateStats* stats) {
  std::vector<std::vector<Matrix<double>>> per_shard(batch.size());
  std::vector<LossTerms> terms(batch.size());
  parallel_for(static_cast<int>(batch.size()), config.workers, [&](int k) {
    const auto kk = static_cast<std::size_t>(k);
    per_shard[kk] = shard_gradient(model, variant, batch[kk], config, &terms[kk]);
  });
  auto total = model.params.zero_like();
  LossTerms sum;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (std::size_t p = 0; p < total.size(); ++p) total[p] += per_shard[k][p];
    sum.policy += terms[k].policy;
    sum.value += terms[k].value;
    sum.entropy_sum += terms[k].entropy_sum;
    sum.entropy_count += terms[k].entropy_count;
    sum.gate_sum += terms[k].gate_sum;
    sum.gate_count += terms[k].gate_count;
  }
  if (stats) {
    stats->policy_loss = sum.policy;
    stats->value_loss = sum.value;
    stats->mean_entropy = sum.entropy_count > 0 ? sum.entropy_sum / sum.entropy_count : 0.0;
    stats->mean_gate = sum.gate_count > 0 ? sum.gate_sum / sum.gate_count : 0.0;
  }
  return total;
}

UpdateStats reinforce_update(Model& model, diffnet::RmsProp<double>& optimizer, const policy::ModelVariant& variant,
                             const Batch& batch, const TrainConfig& config) {
  UpdateStats stats;
  auto grads = batch_gradient(model, variant, batch, config, &stats);
  auto& sinks = model.params.grads();
  for (std::size_t p = 0; p < grads.size(); ++p) sinks[p] += grads[p];
  optimizer.step(model.params);
  return stats;
}

Model initial_model(const TrainConfig& config, const EnvSpec& env) {
  const auto probe = env.make(0);
  return policy::build_model<double>(probe->observation_dim(), probe->action_count(), config.hidden,
                                     envkit::Rng::stream(config.seed, {0xA11CEULL}).next_u64(), config.skip);
}

TrainResult train(const TrainConfig& config, const policy::ModelVariant& variant, const EnvSpec& env,
                  const EpochCallback& on_epoch) {
  Model model = initial_model(config, env);
  diffnet::RmsProp<double> optimizer(model.params, config.optimizer());
  return train_from(std::move(model), std::move(optimizer), 0, config, variant, env, on_epoch);
}

TrainResult train_from(Model model, diffnet::RmsProp<double> optimizer, int first_epoch, const TrainConfig& config,
                       const policy::ModelVariant& variant, const EnvSpec& env, const EpochCallback& on_epoch) {
  config.validate();
  variant.validate();
  TrainResult result;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const double rate = env.p_arrive(epoch);
    const EnvFactory make_env = [&env, rate] { return env.make_with_rate(rate); };
    std::vector<EpisodeSummary> summaries;
    UpdateStats acc;
    for (int u = 0; u < config.updates_per_epoch; ++u) {
      std::vector<ShardSpec> specs;
      for (int k = 0; k < config.shards; ++k) specs.push_back({shard_seed(config.seed, epoch, u, k), 0, config.batch_threshold});
      const Batch batch = collect_batch(model, variant, make_env, specs, config.workers);
      for (const auto& shard : batch) {
        for (const auto& ep : shard.episodes) summaries.push_back(summarize(ep));
      }
      const UpdateStats s = reinforce_update(model, optimizer, variant, batch, config);
      acc.policy_loss += s.policy_loss;
      acc.value_loss += s.value_loss;
      acc.mean_entropy += s.mean_entropy;
    }
    const EvalMetrics agg = aggregate(summaries);
    EpochMetrics m;
    m.epoch = epoch;
    m.episodes = agg.episodes;
    m.mean_reward = agg.episode_return.mean;
    m.avg_steps = agg.steps.mean;
    m.success_rate = agg.success_rate;
    m.mean_gate = agg.mean_gate;
    m.prey_gate = agg.prey_gate;
    if (!env.is_pp()) m.p_arrive = rate;
    m.policy_loss = acc.policy_loss / config.updates_per_epoch;
    m.value_loss = acc.value_loss / config.updates_per_epoch;
    m.entropy = acc.mean_entropy / config.updates_per_epoch;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m, model, optimizer);
  }
  result.model = std::move(model);
  return result;
}

Stat mean_std(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(xs.size()));
  return s;
}

EvalMetrics aggregate(const std::vector<EpisodeSummary>& episodes) {
  EvalMetrics m;
  m.episodes = static_cast<int>(episodes.size());
  std::vector<double> steps, returns;
  double successes = 0.0, gate = 0.0, gate_n = 0.0, prey = 0.0, prey_n = 0.0;
  for (const auto& e : episodes) {
    steps.push_back(e.steps);
    returns.push_back(e.mean_return);
    successes += e.success ? 1.0 : 0.0;
    gate += e.gate_sum;
    gate_n += e.gate_count;
    prey += e.prey_gate_sum;
    prey_n += e.prey_gate_count;
  }
  m.steps = mean_std(steps);
  m.episode_return = mean_std(returns);
  m.success_rate = episodes.empty() ? 0.0 : 100.0 * successes / static_cast<double>(episodes.size());
  m.mean_gate = gate_n > 0 ? gate / gate_n : 0.0;
  if (prey_n > 0) m.prey_gate = prey / prey_n;
  return m;
}

EvalMetrics evaluate(const Model& model, const policy::ModelVariant& variant, const EnvFactory& make_env, int episodes,
                     std::uint64_t seed, int workers, policy::SampleMode mode) {
  if (episodes < 1) throw ContractError("evaluate: need at least one episode");
  std::vector<EpisodeSummary> summaries(static_cast<std::size_t>(episodes));
  parallel_for(episodes, workers, [&](int k) {
    auto env = make_env();
    auto rng = episode_rng(seed, k);
    summaries[static_cast<std::size_t>(k)] = summarize(run_episode(model, variant, *env, episode_env_seed(seed, k), rng, mode));
  });
  return aggregate(summaries);
}

EvalMetrics evaluate_scripted(const Actor& actor, const EnvFactory& make_env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ContractError("evaluate: need at least one episode");
  std::vector<EpisodeSummary> summaries;
  auto env = make_env();
  for (int k = 0; k < episodes; ++k) summaries.push_back(summarize(run_scripted_episode(*env, episode_env_seed(seed, k), actor)));
  return aggregate(summaries);
}

}  // namespace ic3net::train
