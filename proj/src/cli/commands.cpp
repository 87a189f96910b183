#include "ic3net/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ic3net/errors.hpp"
#include "ic3net/train/checkpoint.hpp"

namespace ic3net::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ComparisonError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json eval_to_json(const train::EvalMetrics& m) {
  return json{{"episodes", m.episodes},
              {"avg_steps", m.steps.mean},
              {"avg_steps_std", m.steps.stddev},
              {"success_rate", m.success_rate},
              {"mean_gate", m.mean_gate},
              {"prey_gate", nullable(m.prey_gate)},
              {"mean_return", m.episode_return.mean},
              {"mean_return_std", m.episode_return.stddev}};
}

json epoch_to_json(const train::EpochMetrics& m) {
  return json{{"epoch", m.epoch},
              {"mean_reward", m.mean_reward},
              {"avg_steps", m.avg_steps},
              {"success_rate", m.success_rate},
              {"mean_gate", m.mean_gate},
              {"prey_gate", nullable(m.prey_gate)},
              {"p_arrive", nullable(m.p_arrive)},
              {"episodes", m.episodes}};
}

train::EnvFactory eval_factory(const train::EnvSpec& env) {
  const double rate = evaluation_rate(env);
  return [env, rate] { return env.make_with_rate(rate); };
}

std::string pm(const train::Stat& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", s.mean, s.stddev);
  return buf;
}

double field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nan("");
  return j.at(key).get<double>();
}

}  // namespace

double evaluation_rate(const train::EnvSpec& env) {
  if (env.is_pp()) return 0.0;
  if (!env.curriculum) return env.tj.p_arrive;
  return tj::curriculum_rate(env.schedule.ramp_until, env.tj.level, env.schedule);
}

std::string eval_json(const train::EvalMetrics& m) { return eval_to_json(m).dump(2) + "\n"; }

RunResult run_experiment(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  RunResult result;
  result.dir = resolve_output_dir(config);
  const fs::path ckpt_dir = result.dir / kCheckpointDir;
  fs::create_directories(ckpt_dir);
  const std::string config_text = serialize_config(config);
  write_text(result.dir / kConfigFile, config_text);

  std::ofstream metrics(result.dir / kMetricsFile, std::ios::binary);
  if (!metrics) throw std::runtime_error("cannot write " + (result.dir / kMetricsFile).string());
  metrics << metrics_header() << std::flush;
  std::ofstream periodic;
  if (config.eval.every > 0) {
    periodic.open(result.dir / kEvalFile, std::ios::binary);
    periodic << "epoch,avg_steps,avg_steps_std,success_rate,mean_gate,prey_gate,mean_return\n" << std::flush;
  }

  log << "run " << config.name << ": " << config.env.describe() << ", " << config.variant.label() << ", "
      << config.train.epochs << " epochs -> " << result.dir.string() << "\n";

  std::optional<train::Checkpoint> latest;
  auto on_epoch = [&](const train::EpochMetrics& m, const train::Model& model,
                      const diffnet::RmsProp<double>& opt) {
    metrics << metrics_row(m) << std::flush;
    latest = train::make_checkpoint(m.epoch + 1, config_text, model, &opt);
    const int done = m.epoch + 1;
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%05d.ckpt", done);
      train::save_checkpoint(ckpt_dir / name, *latest);
    }
    if (config.eval.every > 0 && done % config.eval.every == 0) {
      const auto e = train::evaluate(model, config.variant, eval_factory(config.env), config.eval.episodes_periodic,
                                     config.eval.seed, config.train.workers);
      periodic << done << ',' << format_number(e.steps.mean) << ',' << format_number(e.steps.stddev) << ','
               << format_number(e.success_rate) << ',' << format_number(e.mean_gate) << ','
               << format_number(e.prey_gate) << ',' << format_number(e.episode_return.mean) << '\n'
               << std::flush;
    }
    log << "epoch " << m.epoch << " reward " << format_number(m.mean_reward) << " steps "
        << format_number(m.avg_steps) << " success " << format_number(m.success_rate) << " gate "
        << format_number(m.mean_gate) << "\n"
        << std::flush;
  };

  try {
    result.training = train::train(config.train, config.variant, config.env, on_epoch);
  } catch (...) {
    if (latest) train::save_checkpoint(ckpt_dir / kAbortCheckpoint, *latest);
    throw;
  }

  const train::Model& model = result.training.model;
  {
    diffnet::RmsProp<double> blank(model.params, config.train.optimizer());
    train::save_checkpoint(ckpt_dir / kFinalCheckpoint,
                           latest ? *latest : train::make_checkpoint(0, config_text, model, &blank));
  }

  const auto factory = eval_factory(config.env);
  result.final_eval =
      train::evaluate(model, config.variant, factory, config.eval.episodes, config.eval.seed, config.train.workers);
  {
    std::ostringstream trace;
    auto env = factory();
    auto rng = train::episode_rng(config.eval.seed, 0);
    train::run_episode(model, config.variant, *env, train::episode_env_seed(config.eval.seed, 0), rng,
                       policy::SampleMode::kSample, &trace);
    write_text(result.dir / kTraceFile, trace.str());
  }

  json summary{{"name", config.name},
               {"environment", config.env.describe()},
               {"variant", config.variant.label()},
               {"seed", config.train.seed},
               {"epochs", config.train.epochs},
               {"eval_p_arrive", config.env.is_pp() ? json(nullptr) : json(evaluation_rate(config.env))},
               {"eval", eval_to_json(result.final_eval)},
               {"final_epoch", result.training.history.empty() ? json(nullptr)
                                                               : epoch_to_json(result.training.history.back())}};
  write_text(result.dir / kSummaryFile, summary.dump(2) + "\n");

  if (config.plots.learning_curve) {
    plot_file(result.dir / kMetricsFile, PlotKind::kLearningCurve, result.dir / "learning_curve.svg");
  }
  if (config.plots.gate_trace) {
    plot_file(result.dir / kMetricsFile, PlotKind::kGateTrace, result.dir / "gate_trace.svg");
  }
  log << "final eval: steps " << pm(result.final_eval.steps) << ", success "
      << format_number(result.final_eval.success_rate) << "%, gate " << format_number(result.final_eval.mean_gate)
      << "\n";
  return result;
}

train::EvalMetrics evaluate_checkpoint(const fs::path& checkpoint, const ExperimentConfig& config) {
  const auto ckpt = train::load_checkpoint(checkpoint);
  const auto probe = config.env.make_with_rate(evaluation_rate(config.env));
  if (probe->observation_dim() != ckpt.model.shape.obs_dim || probe->action_count() != ckpt.model.shape.num_actions) {
    throw DimensionError("checkpoint expects observations of width " + std::to_string(ckpt.model.shape.obs_dim) +
                         " and " + std::to_string(ckpt.model.shape.num_actions) + " actions; environment has " +
                         std::to_string(probe->observation_dim()) + " and " + std::to_string(probe->action_count()));
  }
  return train::evaluate(ckpt.model, config.variant, eval_factory(config.env), config.eval.episodes,
                         config.eval.seed, config.train.workers);
}

void plot_file(const fs::path& csv, PlotKind kind, const fs::path& out, const std::string& column) {
  write_text(out, render_plot(read_csv(csv), kind, column));
}

std::string Comparison::csv() const {
  std::string out =
      "variant,runs,avg_steps_mean,avg_steps_std,success_rate_mean,success_rate_std,mean_gate_mean,mean_gate_std,"
      "mean_return_mean,mean_return_std\n";
  for (const auto& r : rows) {
    out += r.variant + "," + std::to_string(r.runs);
    for (const auto& s : {r.avg_steps, r.success_rate, r.mean_gate, r.mean_return}) {
      out += "," + format_number(s.mean) + "," + format_number(s.stddev);
    }
    out += "\n";
  }
  return out;
}

std::string Comparison::text() const {
  char line[256];
  std::string out = environment + "\n";
  std::snprintf(line, sizeof(line), "%-16s %4s  %-18s %-18s %-16s %-16s\n", "variant", "runs", "avg steps",
                "success %", "mean gate", "return");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-16s %4d  %-18s %-18s %-16s %-16s\n", r.variant.c_str(), r.runs,
                  pm(r.avg_steps).c_str(), pm(r.success_rate).c_str(), pm(r.mean_gate).c_str(),
                  pm(r.mean_return).c_str());
    out += line;
  }
  return out;
}

Comparison compare_runs(const std::vector<fs::path>& dirs) {
  if (dirs.size() < 2) throw ComparisonError("compare needs at least two run directories, got " + std::to_string(dirs.size()));
  Comparison cmp;
  std::optional<ExperimentConfig> first;
  struct Group {
    std::string variant;
    std::vector<double> steps, success, gate, ret;
  };
  std::vector<Group> groups;
  for (const auto& dir : dirs) {
    ExperimentConfig cfg;
    try {
      cfg = parse_config(read_text(dir / kConfigFile));
    } catch (const ConfigError& e) {
      throw ComparisonError(dir.string() + ": " + e.what());
    }
    if (!first) {
      first = cfg;
      cmp.environment = cfg.env.describe();
    } else if (!same_environment(first->env, cfg.env)) {
      throw ComparisonError("environment mismatch: " + dir.string() + " ran '" + cfg.env.describe() + "', expected '" +
                            first->env.describe() + "'");
    }
    json summary;
    try {
      summary = json::parse(read_text(dir / kSummaryFile));
    } catch (const json::exception& e) {
      throw ComparisonError(dir.string() + ": unreadable summary: " + e.what());
    }
    const json& ev = summary.at("eval");
    const std::string label = cfg.variant.label();
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.variant == label; });
    if (it == groups.end()) {
      groups.push_back(Group{label, {}, {}, {}, {}});
      it = groups.end() - 1;
    }
    it->steps.push_back(field(ev, "avg_steps"));
    it->success.push_back(field(ev, "success_rate"));
    it->gate.push_back(field(ev, "mean_gate"));
    it->ret.push_back(field(ev, "mean_return"));
  }
  for (const auto& g : groups) {
    cmp.rows.push_back(CompareRow{g.variant, static_cast<int>(g.steps.size()), train::mean_std(g.steps),
                                  train::mean_std(g.success), train::mean_std(g.gate), train::mean_std(g.ret)});
  }
  return cmp;
}

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent communication experiments: train, evaluate, plot and compare."};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, eval_every, epochs;
  std::string run_out;
  auto* run = app.add_subcommand("run", "train and evaluate an experiment config");
  run->add_option("config", run_config, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override train.seed (output dir gains a _seed<N> suffix)");
  run->add_option("--workers", workers, "override train.workers");
  run->add_option("--epochs", epochs, "override train.epochs");
  run->add_option("--eval-every", eval_every, "evaluate every N epochs into eval.csv");
  run->add_option("--output-dir", run_out, "override output_dir");

  std::string eval_ckpt, eval_config;
  std::optional<int> eval_episodes;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_option("config", eval_config, "experiment config (JSON)")->required();
  ev->add_option("--episodes", eval_episodes, "override eval.episodes");

  std::string plot_csv, plot_kind, plot_out, plot_column;
  auto* pl = app.add_subcommand("plot", "render a metrics CSV as SVG");
  pl->add_option("csv", plot_csv, "metrics.csv")->required();
  pl->add_option("--kind", plot_kind, "learning_curve or gate_trace")->required();
  pl->add_option("--column", plot_column, "column for learning_curve");
  pl->add_option("--out", plot_out, "output file (default: <kind>.svg next to the CSV)");

  std::vector<std::string> cmp_dirs;
  std::string cmp_csv;
  auto* cmp = app.add_subcommand("compare", "tabulate final metrics of several runs");
  cmp->add_option("dirs", cmp_dirs, "run directories")->required();
  cmp->add_option("--csv", cmp_csv, "CSV output (default: compare.csv under the output root)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(run_config);
      if (seed) {
        cfg.train.seed = *seed;
        if (run_out.empty()) {
          cfg.output_dir = (cfg.output_dir.empty() ? cfg.name : cfg.output_dir) + "_seed" + std::to_string(*seed);
        }
      }
      if (workers) cfg.train.workers = *workers;
      if (epochs) cfg.train.epochs = *epochs;
      if (eval_every) cfg.eval.every = *eval_every;
      if (!run_out.empty()) cfg.output_dir = run_out;
      cfg.validate();
      run_experiment(cfg, std::cout);
    } else if (*ev) {
      ExperimentConfig cfg = load_config(eval_config);
      if (eval_episodes) cfg.eval.episodes = *eval_episodes;
      cfg.validate();
      std::cout << eval_json(evaluate_checkpoint(eval_ckpt, cfg));
    } else if (*pl) {
      const PlotKind kind = plot_kind_from_string(plot_kind);
      const fs::path csv(plot_csv);
      const fs::path out = plot_out.empty() ? csv.parent_path() / (to_string(kind) + ".svg") : fs::path(plot_out);
      plot_file(csv, kind, out, plot_column);
      std::cout << out.string() << "\n";
    } else if (*cmp) {
      std::vector<fs::path> dirs(cmp_dirs.begin(), cmp_dirs.end());
      const Comparison c = compare_runs(dirs);
      const fs::path out = cmp_csv.empty() ? output_root() / "compare.csv" : fs::path(cmp_csv);
      write_text(out, c.csv());
      std::cout << c.text();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ic3net::cli
