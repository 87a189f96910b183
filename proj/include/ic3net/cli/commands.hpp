#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ic3net/cli/experiment.hpp"
#include "ic3net/cli/plot.hpp"

namespace ic3net::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Files written into a run directory.
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kEvalFile = "eval.csv";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kTraceFile = "eval_trace.jsonl";
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kAbortCheckpoint = "abort.ckpt";

/// Arrival probability used for final evaluation: the end of the curriculum,
/// or the fixed rate when the curriculum is off.
double evaluation_rate(const train::EnvSpec& env);

struct RunResult {
  std::filesystem::path dir;
  train::TrainResult training;
  train::EvalMetrics final_eval;
};

/// Trains, evaluates and writes every output of a run. On a failure during
/// training the latest completed epoch is saved as checkpoints/abort.ckpt
/// before the error propagates.
RunResult run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Evaluates a checkpoint under `config`'s environment and evaluation settings.
train::EvalMetrics evaluate_checkpoint(const std::filesystem::path& checkpoint, const ExperimentConfig& config);

/// Renders a plot of a metrics CSV and writes it to `out`.
void plot_file(const std::filesystem::path& csv, PlotKind kind, const std::filesystem::path& out,
               const std::string& column = "");

struct CompareRow {
  std::string variant;
  int runs = 0;
  train::Stat avg_steps;
  train::Stat success_rate;
  train::Stat mean_gate;
  train::Stat mean_return;
};

struct Comparison {
  std::string environment;
  std::vector<CompareRow> rows;

  std::string csv() const;
  std::string text() const;
};

/// Final evaluation metrics grouped by variant, mean and std over the runs
/// (seeds) of each group. Needs at least two runs on the same environment.
Comparison compare_runs(const std::vector<std::filesystem::path>& dirs);

std::string eval_json(const train::EvalMetrics& m);

/// Command-line entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace ic3net::cli
