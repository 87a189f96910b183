#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ic3net/diffnet/rmsprop.hpp"
#include "ic3net/train/rollout.hpp"

namespace ic3net::train {

inline constexpr int kCheckpointVersion = 1;

/// Text container: a version line, the model shape, the experiment config
/// (opaque JSON), then every parameter and optimizer accumulator with a
/// "name rows cols" header followed by exact hex-float values.
struct Checkpoint {
  int version = kCheckpointVersion;
  int epoch = 0;  // epochs completed
  std::string config_json;
  Model model;
  std::vector<diffnet::Matrix<double>> mean_square;  // empty if no optimizer state
  long optimizer_steps = 0;

  diffnet::RmsProp<double> optimizer(const diffnet::RmsPropConfig& config) const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

/// Writes to a sibling temporary file, then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(int epoch, std::string config_json, const Model& model,
                           const diffnet::RmsProp<double>* optimizer = nullptr);

}  // namespace ic3net::train
