#include "ic3net/cli/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ic3net/errors.hpp"

namespace ic3net::cli {

namespace {

using nlohmann::json;

// Reads fields of one JSON object, reporting type errors and unknown keys by path.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
      out = v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      const auto x = v.get<long long>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        throw ConfigError(where(key) + ": integer out of range");
      }
      out = static_cast<T>(x);
    } else {
      if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
      out = v.get<T>();
    }
  }

  template <typename F>
  void get_enum(const std::string& key, F convert) {
    std::string s;
    if (!has(key)) return;
    get(key, s);
    try {
      convert(s);
    } catch (const ConfigError& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

policy::RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "individual") return policy::RewardMode::kIndividual;
  if (s == "global_average") return policy::RewardMode::kGlobalAverage;
  throw ConfigError("unknown reward mode '" + s + "' (expected individual or global_average)");
}

json env_to_json(const train::EnvSpec& env) {
  if (env.is_pp()) {
    const auto& c = env.pp;
    return json{{"kind", "pp"},           {"grid", c.grid},         {"predators", c.predators},
                {"vision", c.vision},     {"mode", pp::to_string(c.mode)}, {"max_steps", c.max_steps},
                {"r_explore", c.r_explore}, {"r_prey", c.r_prey},   {"trainable_prey", c.trainable_prey},
                {"prey_alive_reward", c.prey_alive_reward}};
  }
  const auto& c = env.tj;
  return json{{"kind", "tj"},
              {"level", tj::to_string(c.level)},
              {"n_total", c.n_total},
              {"max_steps", c.max_steps},
              {"p_arrive", c.p_arrive},
              {"curriculum", env.curriculum},
              {"hold_until", env.schedule.hold_until},
              {"ramp_until", env.schedule.ramp_until},
              {"r_coll", c.r_coll},
              {"r_time", c.r_time}};
}

train::EnvSpec env_from_json(const json& j) {
  Fields f(j, "env");
  train::EnvSpec env;
  std::string kind = "pp";
  f.get("kind", kind);
  if (kind == "pp") {
    env.kind = train::EnvSpec::Kind::kPredatorPrey;
    int grid = 5;
    f.get("grid", grid);
    auto mode = pp::Mode::kMixed;
    f.get_enum("mode", [&](const std::string& s) {
      try {
        mode = pp::mode_from_string(s);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    });
    try {
      env.pp = pp::Config::standard(grid, mode);
    } catch (const std::exception& e) {
      throw ConfigError(f.where("grid") + ": " + e.what());
    }
    f.get("predators", env.pp.predators);
    f.get("vision", env.pp.vision);
    f.get("max_steps", env.pp.max_steps);
    f.get("r_explore", env.pp.r_explore);
    f.get("r_prey", env.pp.r_prey);
    f.get("trainable_prey", env.pp.trainable_prey);
    f.get("prey_alive_reward", env.pp.prey_alive_reward);
  } else if (kind == "tj") {
    env.kind = train::EnvSpec::Kind::kTrafficJunction;
    f.get_enum("level", [&](const std::string& s) {
      try {
        env.tj.level = tj::level_from_string(s);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    });
    f.get("n_total", env.tj.n_total);
    f.get("max_steps", env.tj.max_steps);
    env.tj.p_arrive = tj::level_spec(env.tj.level).p_arrive_end;
    f.get("p_arrive", env.tj.p_arrive);
    f.get("curriculum", env.curriculum);
    f.get("hold_until", env.schedule.hold_until);
    f.get("ramp_until", env.schedule.ramp_until);
    f.get("r_coll", env.tj.r_coll);
    f.get("r_time", env.tj.r_time);
  } else {
    throw ConfigError("env.kind: unknown environment '" + kind + "' (expected pp or tj)");
  }
  f.finish();
  return env;
}

json train_to_json(const train::TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"updates_per_epoch", t.updates_per_epoch},
              {"batch_threshold", t.batch_threshold},
              {"shards", t.shards},
              {"workers", t.workers},
              {"lr", t.lr},
              {"rmsprop_decay", t.rmsprop_decay},
              {"rmsprop_epsilon", t.rmsprop_epsilon},
              {"value_coef", t.value_coef},
              {"gamma", t.gamma},
              {"entropy_coef", t.entropy_coef},
              {"seed", t.seed},
              {"hidden", t.hidden},
              {"skip", t.skip}};
}

train::TrainConfig train_from_json(const json& j) {
  Fields f(j, "train");
  train::TrainConfig t;
  f.get("epochs", t.epochs);
  f.get("updates_per_epoch", t.updates_per_epoch);
  f.get("batch_threshold", t.batch_threshold);
  f.get("shards", t.shards);
  f.get("workers", t.workers);
  f.get("lr", t.lr);
  f.get("rmsprop_decay", t.rmsprop_decay);
  f.get("rmsprop_epsilon", t.rmsprop_epsilon);
  f.get("value_coef", t.value_coef);
  f.get("gamma", t.gamma);
  f.get("entropy_coef", t.entropy_coef);
  f.get("seed", t.seed);
  f.get("hidden", t.hidden);
  f.get("skip", t.skip);
  f.finish();
  return t;
}

policy::ModelVariant variant_from_json(const json& j) {
  Fields f(j, "model");
  std::string kind = "ic3net";
  f.get("kind", kind);
  policy::ModelVariant v;
  try {
    v = policy::ModelVariant::make(policy::model_kind_from_string(kind));
  } catch (const ConfigError& e) {
    throw ConfigError(f.where("kind") + ": " + e.what());
  }
  f.get_enum("gate", [&](const std::string& s) { v.gate_mode = policy::gate_mode_from_string(s); });
  f.get_enum("reward", [&](const std::string& s) { v.reward_mode = reward_mode_from_string(s); });
  f.finish();
  try {
    v.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return v;
}

}  // namespace

bool same_environment(const train::EnvSpec& a, const train::EnvSpec& b) {
  if (a.kind != b.kind) return false;
  if (a.is_pp()) return a.pp == b.pp;
  return a.tj == b.tj && a.curriculum == b.curriculum && a.schedule == b.schedule;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.name == b.name && same_environment(a.env, b.env) && a.variant.kind == b.variant.kind &&
         a.variant.gate_mode == b.variant.gate_mode && a.variant.reward_mode == b.variant.reward_mode &&
         a.train == b.train && a.output_dir == b.output_dir && a.eval == b.eval &&
         a.checkpoint_every == b.checkpoint_every && a.plots == b.plots;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name: must not be empty");
  if (env.is_pp()) {
    env.pp.validate();
  } else {
    if (env.tj.n_total < 0) throw ConfigError("env.n_total: must be >= 0");
    if (env.tj.max_steps < 0) throw ConfigError("env.max_steps: must be >= 0");
    if (!(env.tj.p_arrive >= 0.0 && env.tj.p_arrive <= 1.0)) throw ConfigError("env.p_arrive: must lie in [0, 1]");
    if (env.schedule.hold_until < 0 || env.schedule.ramp_until <= env.schedule.hold_until) {
      throw ConfigError("env.ramp_until: must exceed hold_until >= 0");
    }
  }
  variant.validate();
  train.validate();
  if (eval.episodes < 1) throw ConfigError("eval.episodes: must be >= 1");
  if (eval.every < 0) throw ConfigError("eval.every: must be >= 0");
  if (eval.episodes_periodic < 1) throw ConfigError("eval.episodes_periodic: must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every: must be >= 0");
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  Fields f(root, "");
  ExperimentConfig c;
  f.get("name", c.name);
  if (f.has("env")) c.env = env_from_json(f.raw("env"));
  if (f.has("model")) c.variant = variant_from_json(f.raw("model"));
  if (f.has("train")) c.train = train_from_json(f.raw("train"));
  f.get("output_dir", c.output_dir);
  if (f.has("eval")) {
    Fields e(f.raw("eval"), "eval");
    e.get("episodes", c.eval.episodes);
    e.get("seed", c.eval.seed);
    e.get("every", c.eval.every);
    e.get("episodes_periodic", c.eval.episodes_periodic);
    e.finish();
  }
  f.get("checkpoint_every", c.checkpoint_every);
  if (f.has("plots")) {
    Fields p(f.raw("plots"), "plots");
    p.get("learning_curve", c.plots.learning_curve);
    p.get("gate_trace", c.plots.gate_trace);
    p.finish();
  }
  f.finish();
  c.validate();
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  json root = json::object();
  root["name"] = c.name;
  root["env"] = env_to_json(c.env);
  root["model"] = json{{"kind", policy::to_string(c.variant.kind)},
                       {"gate", policy::to_string(c.variant.gate_mode)},
                       {"reward", policy::to_string(c.variant.reward_mode)}};
  root["train"] = train_to_json(c.train);
  root["output_dir"] = c.output_dir;
  root["eval"] = json{{"episodes", c.eval.episodes},
                      {"seed", c.eval.seed},
                      {"every", c.eval.every},
                      {"episodes_periodic", c.eval.episodes_periodic}};
  root["checkpoint_every"] = c.checkpoint_every;
  root["plots"] = json{{"learning_curve", c.plots.learning_curve}, {"gate_trace", c.plots.gate_trace}};
  return root.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::filesystem::path output_root() {
  const char* root = std::getenv(kOutputRootVar);
  return root && *root ? std::filesystem::path(root) : std::filesystem::path(".");
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  std::filesystem::path dir = config.output_dir.empty() ? config.name : config.output_dir;
  if (dir.is_absolute()) return dir;
  return output_root() / dir;
}

}  // namespace ic3net::cli
