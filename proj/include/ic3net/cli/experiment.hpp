#pragma once

#include <filesystem>
#include <string>

#include "ic3net/policy/comm_policy.hpp"
#include "ic3net/train/env_spec.hpp"
#include "ic3net/train/trainer.hpp"

namespace ic3net::cli {

struct EvalSettings {
  int episodes = 1000;
  std::uint64_t seed = 20180;
  int every = 0;  // periodic evaluation cadence in epochs, 0 = only at the end
  int episodes_periodic = 100;

  friend bool operator==(const EvalSettings&, const EvalSettings&) = default;
};

struct PlotSettings {
  bool learning_curve = true;
  bool gate_trace = true;

  friend bool operator==(const PlotSettings&, const PlotSettings&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  train::EnvSpec env;
  policy::ModelVariant variant;
  train::TrainConfig train;
  std::string output_dir;  // empty: use `name`
  EvalSettings eval;
  int checkpoint_every = 50;
  PlotSettings plots;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Compares only the active environment section (the inactive one is not serialized).
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
bool same_environment(const train::EnvSpec& a, const train::EnvSpec& b);

ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Output directory of a run: output_dir (or name) under IC3NET_OUTPUT_ROOT
/// when that variable is set and the directory is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);
std::filesystem::path output_root();

inline constexpr const char* kOutputRootVar = "IC3NET_OUTPUT_ROOT";

}  // namespace ic3net::cli
