#include "latent_steer/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "latent_steer/checkpoint.hpp"
#include "latent_steer/errors.hpp"
#include "latent_steer/remote_oracle.hpp"

namespace latent_steer {
namespace {

using nlohmann::json;

// P1/P2 come from `calibrate-thresholds` on this profile: P2 is the 95th
// percentile of single-step identity drift under N(0, I) actions and P1 keeps
// the 750:900 ratio. Unit k_gen keeps that drift on the scale of one step.
const char* const kDeskProfile = R"({
  "config_version": 1,
  "profile": "desk",
  "run_name": "desk",
  "env": {
    "d": 16,
    "epsilon": 1.5,
    "buckets": {"lo": 20, "hi": 40, "width": 5},
    "rewards": {"P1": 1.6972, "P2": 2.0366},
    "normalize_k_gen": true
  },
  "oracle": {"kind": "synthetic", "seed": 7, "a": 3, "b": 30, "gamma": 0.75},
  "train": {"total_steps": 200000, "learning_rate": 0.001, "epochs": 10, "horizon": 64},
  "eval": {"linear_step_size": 0.1, "linear_n_steps": 100}
})";

const char* const kPaperProfile = R"({
  "config_version": 1,
  "profile": "paper",
  "run_name": "paper",
  "env": {
    "d": 512,
    "T": 0.3,
    "episode_length": 60,
    "epsilon": 3,
    "buckets": {"lo": 20, "hi": 60, "width": 5},
    "rewards": {"r": 2, "n": 25, "m": 2, "P1": 750, "P2": 900}
  },
  "oracle": {"kind": "remote", "endpoint": "tcp://127.0.0.1:7878"},
  "train": {"total_steps": 1000000}
})";

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json* find(const std::string& dotted) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = dotted.find('.', start);
      const std::string key = dotted.substr(start, dot == std::string::npos ? dotted.npos : dot - start);
      if (!node->is_object() || !node->contains(key)) return nullptr;
      node = &(*node)[key];
      if (dot == std::string::npos) return node;
      start = dot + 1;
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* node = find(key);
    if (node == nullptr || node->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!node->is_number()) throw std::invalid_argument("expected a number");
        out = node->get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node->is_boolean()) throw std::invalid_argument("expected a boolean");
        out = node->get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (node->is_number_float()) {
          const double v = node->get<double>();
          if (v != std::floor(v)) throw std::invalid_argument("expected an integer");
          out = static_cast<T>(v);
        } else if (node->is_number_integer()) {
          if constexpr (std::is_unsigned_v<T>) {
            if (node->is_number_unsigned() || node->get<std::int64_t>() >= 0) {
              out = node->get<T>();
            } else {
              throw std::invalid_argument("expected a non-negative integer");
            }
          } else {
            out = node->get<T>();
          }
        } else {
          throw std::invalid_argument("expected an integer");
        }
      } else {
        if (!node->is_string()) throw std::invalid_argument("expected a string");
        out = node->get<std::string>();
      }
    } catch (const std::exception& e) {
      error(key, e.what());
    }
  }

  void error(const std::string& key, const std::string& what) { errors_.push_back(key + ": " + what); }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  const json& root_;
  std::vector<std::string> errors_;
};

// Reports every key of `layer` absent from `schema`, recursing into objects.
void check_keys(const json& layer, const json& schema, const std::string& prefix,
                std::vector<std::string>& errors) {
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) {
      errors.push_back(path + ": unknown key");
      continue;
    }
    const json& expected = schema[it.key()];
    if (expected.is_object()) {
      if (!it.value().is_object()) {
        errors.push_back(path + ": expected an object");
      } else {
        check_keys(it.value(), expected, path, errors);
      }
    }
  }
}

void merge_into(json& base, const json& layer) {
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

json override_layer(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  json layer = json::object();
  json* node = &layer;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? key.npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(assignment.substr(eq + 1));
      return layer;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config file " + path.string() + " is not a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  std::vector<std::string> seen;
  for (const auto& e : errors) {
    if (std::find(seen.begin(), seen.end(), e) != seen.end()) continue;
    seen.push_back(e);
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

}  // namespace

std::vector<std::string> builtin_profiles() { return {"desk", "paper"}; }

json builtin_profile(const std::string& name) {
  if (name == "desk") return json::parse(kDeskProfile);
  if (name == "paper") return json::parse(kPaperProfile);
  throw ConfigError("unknown profile '" + name + "'");
}

json default_config_json() {
  json j = config_to_json(RunConfig{});
  // Null means "the algorithm's default", resolved in config_from_json.
  j["train"]["learning_rate"] = nullptr;
  j["train"]["entropy_coef"] = nullptr;
  return j;
}

json config_to_json(const RunConfig& cfg) {
  const EnvConfig& e = cfg.env;
  const TrainConfig& t = cfg.train;
  json k_hyp = nullptr;
  if (cfg.k_hyp) k_hyp = std::vector<double>(cfg.k_hyp->data(), cfg.k_hyp->data() + cfg.k_hyp->size());
  return {
      {"config_version", cfg.config_version},
      {"profile", cfg.profile},
      {"run_name", cfg.run_name},
      {"output_dir", cfg.output_dir},
      {"env",
       {{"d", e.typical.d},
        {"T", e.T},
        {"episode_length", e.episode_length},
        {"epsilon", e.typical.epsilon},
        {"buckets", {{"lo", e.buckets.lo}, {"hi", e.buckets.hi}, {"width", e.buckets.width}}},
        {"rewards",
         {{"r", e.rewards.r}, {"n", e.rewards.n}, {"m", e.rewards.m}, {"P1", e.rewards.P1}, {"P2", e.rewards.P2}}},
        {"k_hyp", k_hyp},
        {"shell_project_start", e.shell_project_start},
        {"check_typicality_on_start", e.check_typicality_on_start},
        {"normalize_k_gen", e.normalize_k_gen}}},
      {"oracle",
       {{"kind", cfg.oracle.kind},
        {"seed", cfg.oracle.seed},
        {"a", cfg.oracle.a},
        {"b", cfg.oracle.b},
        {"gamma", cfg.oracle.gamma},
        {"age_min", cfg.oracle.age_min},
        {"age_max", cfg.oracle.age_max},
        {"endpoint", cfg.oracle.endpoint},
        {"timeout_s", cfg.oracle.timeout_s}}},
      {"train",
       {{"algo", to_string(t.algo)},
        {"total_steps", t.total_steps},
        {"horizon", t.horizon},
        {"n_envs", t.n_envs},
        {"gamma", t.gamma},
        {"lambda", t.lambda},
        {"clip_ratio", t.clip_ratio},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"minibatches", t.minibatches},
        {"value_coef", t.value_coef},
        {"entropy_coef", t.entropy_coef},
        {"max_grad_norm", t.max_grad_norm},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"adam_epsilon", t.adam_epsilon},
        {"pool_size", t.pool_size},
        {"conditioning_switch_every", t.conditioning_switch_every},
        {"seed", t.seed},
        {"checkpoint_every", t.checkpoint_every},
        {"curve_window", t.curve_window}}},
      {"eval",
       {{"episodes", cfg.eval.episodes},
        {"seed", cfg.eval.seed},
        {"linear_step_size", cfg.eval.linear_step_size},
        {"linear_n_steps", cfg.eval.linear_n_steps},
        {"centroid_split", cfg.eval.centroid_split},
        {"cluster_size", cfg.eval.cluster_size},
        {"action_mode", cfg.eval.action_mode},
        {"bootstrap_resamples", cfg.eval.bootstrap_resamples},
        {"hyperplane_samples", cfg.eval.hyperplane_samples}}},
  };
}

namespace {

// Parses the tree, appending every problem to the errors already found by the
// caller so one ConfigError lists them all.
RunConfig parse_config(const json& j, std::vector<std::string> errors) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j, default_config_json(), "", errors);

  Reader r(j);
  RunConfig cfg;
  r.read("config_version", cfg.config_version);
  if (cfg.config_version != kConfigVersion) {
    r.error("config_version", "unsupported version " + std::to_string(cfg.config_version));
  }
  r.read("profile", cfg.profile);
  r.read("run_name", cfg.run_name);
  r.read("output_dir", cfg.output_dir);

  // Algorithm-dependent defaults apply before explicit train values.
  std::string algo = "ppo";
  r.read("train.algo", algo);
  try {
    cfg.train = TrainConfig::defaults_for(algo_from_string(algo));
  } catch (const Error& e) {
    r.error("train.algo", e.what());
  }

  EnvConfig& e = cfg.env;
  r.read("env.d", e.typical.d);
  r.read("env.T", e.T);
  r.read("env.episode_length", e.episode_length);
  r.read("env.epsilon", e.typical.epsilon);
  r.read("env.buckets.lo", e.buckets.lo);
  r.read("env.buckets.hi", e.buckets.hi);
  r.read("env.buckets.width", e.buckets.width);
  r.read("env.rewards.r", e.rewards.r);
  r.read("env.rewards.n", e.rewards.n);
  r.read("env.rewards.m", e.rewards.m);
  r.read("env.rewards.P1", e.rewards.P1);
  r.read("env.rewards.P2", e.rewards.P2);
  r.read("env.shell_project_start", e.shell_project_start);
  r.read("env.check_typicality_on_start", e.check_typicality_on_start);
  r.read("env.normalize_k_gen", e.normalize_k_gen);
  if (const json* k = r.find("env.k_hyp"); k != nullptr && !k->is_null()) {
    if (!k->is_array() || k->empty()) {
      r.error("env.k_hyp", "expected null or a non-empty array of numbers");
    } else {
      Vector v(static_cast<Eigen::Index>(k->size()));
      bool ok = true;
      for (std::size_t i = 0; i < k->size(); ++i) {
        if (!(*k)[i].is_number()) ok = false;
        else v[static_cast<Eigen::Index>(i)] = (*k)[i].get<double>();
      }
      if (!ok) r.error("env.k_hyp", "expected numbers");
      else cfg.k_hyp = v;
    }
  }

  OracleConfig& o = cfg.oracle;
  r.read("oracle.kind", o.kind);
  r.read("oracle.seed", o.seed);
  r.read("oracle.a", o.a);
  r.read("oracle.b", o.b);
  r.read("oracle.gamma", o.gamma);
  r.read("oracle.age_min", o.age_min);
  r.read("oracle.age_max", o.age_max);
  r.read("oracle.endpoint", o.endpoint);
  r.read("oracle.timeout_s", o.timeout_s);

  TrainConfig& t = cfg.train;
  r.read("train.total_steps", t.total_steps);
  r.read("train.horizon", t.horizon);
  r.read("train.n_envs", t.n_envs);
  r.read("train.gamma", t.gamma);
  r.read("train.lambda", t.lambda);
  r.read("train.clip_ratio", t.clip_ratio);
  r.read("train.learning_rate", t.learning_rate);
  r.read("train.epochs", t.epochs);
  r.read("train.minibatches", t.minibatches);
  r.read("train.value_coef", t.value_coef);
  r.read("train.entropy_coef", t.entropy_coef);
  r.read("train.max_grad_norm", t.max_grad_norm);
  r.read("train.adam_beta1", t.adam_beta1);
  r.read("train.adam_beta2", t.adam_beta2);
  r.read("train.adam_epsilon", t.adam_epsilon);
  r.read("train.pool_size", t.pool_size);
  r.read("train.conditioning_switch_every", t.conditioning_switch_every);
  r.read("train.seed", t.seed);
  r.read("train.checkpoint_every", t.checkpoint_every);
  r.read("train.curve_window", t.curve_window);

  EvalConfig& v = cfg.eval;
  r.read("eval.episodes", v.episodes);
  r.read("eval.seed", v.seed);
  r.read("eval.linear_step_size", v.linear_step_size);
  r.read("eval.linear_n_steps", v.linear_n_steps);
  r.read("eval.centroid_split", v.centroid_split);
  r.read("eval.cluster_size", v.cluster_size);
  r.read("eval.action_mode", v.action_mode);
  r.read("eval.bootstrap_resamples", v.bootstrap_resamples);
  r.read("eval.hyperplane_samples", v.hyperplane_samples);

  errors.insert(errors.end(), r.errors().begin(), r.errors().end());

  // Semantic checks, each reported under its own key.
  if (o.kind != "synthetic" && o.kind != "remote") errors.push_back("oracle.kind: must be synthetic or remote");
  if (o.kind == "remote" && o.endpoint.empty()) errors.push_back("oracle.endpoint: required for a remote oracle");
  if (o.kind == "synthetic" && o.a == 0.0) errors.push_back("oracle.a: must be non-zero");
  if (o.kind == "synthetic" && o.gamma < 0.0) errors.push_back("oracle.gamma: must be >= 0");
  if (o.kind == "synthetic" && e.typical.d < 2) errors.push_back("env.d: the synthetic oracle needs d >= 2");
  if (!(o.timeout_s > 0.0)) errors.push_back("oracle.timeout_s: must be > 0");
  if (cfg.k_hyp && cfg.k_hyp->size() != e.typical.d) errors.push_back("env.k_hyp: length must equal env.d");
  if (cfg.k_hyp && !(cfg.k_hyp->norm() > 0.0)) errors.push_back("env.k_hyp: must be non-zero");
  if (v.episodes < 1) errors.push_back("eval.episodes: must be >= 1");
  if (!(v.linear_step_size > 0.0)) errors.push_back("eval.linear_step_size: must be > 0");
  if (v.linear_n_steps < 1) errors.push_back("eval.linear_n_steps: must be >= 1");
  if (v.centroid_split != "extreme_buckets" && v.centroid_split != "midpoint") {
    errors.push_back("eval.centroid_split: must be extreme_buckets or midpoint");
  }
  if (v.cluster_size < 1) errors.push_back("eval.cluster_size: must be >= 1");
  if (v.action_mode != "stochastic" && v.action_mode != "mean") {
    errors.push_back("eval.action_mode: must be stochastic or mean");
  }
  if (v.bootstrap_resamples < 1) errors.push_back("eval.bootstrap_resamples: must be >= 1");
  if (v.hyperplane_samples < 2) errors.push_back("eval.hyperplane_samples: must be >= 2");

  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& ex) {
      errors.push_back(ex.what());
    }
  };
  collect([&] { e.typical.validate(); });
  collect([&] { e.buckets.validate(); });
  collect([&] { e.rewards.validate(); });
  if (!(e.T >= 0.0 && e.T < 1.0)) errors.push_back("env.T: must lie in [0, 1)");
  if (e.episode_length < 1) errors.push_back("env.episode_length: must be >= 1");
  collect([&] { t.validate(); });

  if (!errors.empty()) throw ConfigError("invalid config: " + join_errors(errors));
  // Hyperplane placeholder of the right dimension; build_runtime resolves the real one.
  e.k_hyp = DirectionVector::from_unit(Vector::Unit(e.typical.d, 0));
  return cfg;
}

}  // namespace

RunConfig config_from_json(const json& j) { return parse_config(j, {}); }

RunConfig load_config(const ConfigSources& sources) {
  json file_layer = json::object();
  if (sources.file) file_layer = read_json_file(*sources.file);

  std::vector<json> override_layers;
  std::optional<std::string> override_profile;
  for (const auto& o : sources.overrides) {
    json layer = override_layer(o);
    if (layer.contains("profile") && layer["profile"].is_string()) {
      override_profile = layer["profile"].get<std::string>();
    }
    override_layers.push_back(std::move(layer));
  }

  std::optional<std::string> profile = sources.profile;
  if (!profile) profile = override_profile;
  if (!profile && file_layer.contains("profile") && file_layer["profile"].is_string()) {
    const auto name = file_layer["profile"].get<std::string>();
    if (!name.empty()) profile = name;
  }

  json merged = default_config_json();
  merged["profile"] = "";
  std::vector<std::string> errors;
  if (profile) {
    json p = builtin_profile(*profile);
    merge_into(merged, p);
  }
  check_keys(file_layer, merged, "", errors);
  merge_into(merged, file_layer);
  if (sources.seed_env) {
    try {
      std::size_t used = 0;
      const unsigned long long seed = std::stoull(*sources.seed_env, &used);
      if (used != sources.seed_env->size()) throw std::invalid_argument("trailing characters");
      merged["train"]["seed"] = static_cast<std::uint64_t>(seed);
    } catch (const std::exception&) {
      errors.push_back("LATENT_STEER_SEED: not a non-negative integer");
    }
  }
  for (const auto& layer : override_layers) {
    check_keys(layer, merged, "", errors);
    merge_into(merged, layer);
  }
  if (profile) merged["profile"] = *profile;
  return parse_config(merged, std::move(errors));
}

std::string config_hash(const RunConfig& cfg) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(config_to_json(cfg).dump()));
  return buf;
}

Runtime build_runtime(const RunConfig& cfg) {
  Runtime rt;
  rt.env = cfg.env;
  const int d = cfg.env.d();
  if (cfg.oracle.kind == "synthetic") {
    SyntheticOracleSpec spec = SyntheticOracleSpec::random(d, cfg.oracle.seed, cfg.oracle.a, cfg.oracle.b,
                                                           cfg.oracle.gamma);
    spec.age_min = cfg.oracle.age_min;
    spec.age_max = cfg.oracle.age_max;
    spec.validate();
    rt.env.k_hyp = cfg.k_hyp ? unit_normalize(*cfg.k_hyp) : entangled_hyperplane(spec);
    rt.oracle = std::make_unique<SyntheticOracle>(spec);
    rt.synthetic = spec;
  } else {
    if (!cfg.k_hyp) throw ConfigError("env.k_hyp: a remote oracle needs an explicit hyperplane");
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(cfg.oracle.timeout_s * 1000.0));
    auto remote = std::make_unique<RemoteOracle>(cfg.oracle.endpoint, timeout);
    if (remote->dim() != d) {
      throw ConfigError("oracle dimension " + std::to_string(remote->dim()) + " does not match env.d " +
                        std::to_string(d));
    }
    rt.env.k_hyp = unit_normalize(*cfg.k_hyp);
    rt.oracle = std::move(remote);
  }
  rt.env.validate();
  return rt;
}

}  // namespace latent_steer
