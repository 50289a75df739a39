#include "latent_steer_app/app.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "latent_steer/baselines.hpp"
#include "latent_steer/calibration.hpp"
#include "latent_steer/checkpoint.hpp"
#include "latent_steer/config.hpp"
#include "latent_steer/errors.hpp"
#include "latent_steer/evaluation.hpp"
#include "latent_steer/remote_oracle.hpp"
#include "latent_steer/trainer.hpp"
#include "latent_steer/trajectory_io.hpp"

namespace latent_steer::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ConfigOptions {
  std::string config;
  std::string profile;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config, "Config file, or the name of a built-in profile");
    if (config_required) opt->required();
    cmd->add_option("--profile", profile, "Built-in profile layered under the config file");
    cmd->add_option("--set", sets, "Override, e.g. --set env.T=0.5 (repeatable)");
    cmd->add_option("--seed", seed, "Training seed (overrides LATENT_STEER_SEED)");
  }

  RunConfig load() const {
    ConfigSources src;
    if (!profile.empty()) src.profile = profile;
    if (!config.empty()) {
      const auto names = builtin_profiles();
      const bool is_profile = std::find(names.begin(), names.end(), config) != names.end();
      if (is_profile && !fs::exists(config)) {
        if (!src.profile) src.profile = config;
      } else {
        src.file = fs::path(config);
      }
    }
    if (const char* env = std::getenv("LATENT_STEER_SEED"); env != nullptr) src.seed_env = env;
    src.overrides = sets;
    if (seed) src.overrides.push_back("train.seed=" + std::to_string(*seed));
    return load_config(src);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

/// Config snapshot next to a checkpoint: same directory or its parent.
fs::path config_beside(const fs::path& checkpoint) {
  const fs::path dir = checkpoint.parent_path();
  for (const fs::path& candidate : {dir / "config.json", dir.parent_path() / "config.json"}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw ConfigError("no config.json found beside checkpoint " + checkpoint.string() +
                    "; pass --config");
}

RunConfig config_from_file(const fs::path& path) {
  ConfigSources src;
  src.file = path;
  return load_config(src);
}

ActionMode action_mode(const RunConfig& cfg) {
  return cfg.eval.action_mode == "mean" ? ActionMode::mean : ActionMode::stochastic;
}

MlpParams random_policy(int d) {
  MlpParams p;
  p.net = Mlp::zeros(3 * d, kHiddenWidth, d + 2);
  p.log_std = Vector::Zero(d + 2);
  return p;
}

bool is_policy_method(const std::string& name) {
  return name == "policy" || name == "untrained" || name == "random";
}

std::vector<MethodSpec> build_methods(std::vector<std::string> names, const RunConfig& cfg, Runtime& rt,
                                      const std::optional<Checkpoint>& checkpoint) {
  // Policies run first so linear walks can match their coverage.
  std::stable_partition(names.begin(), names.end(), is_policy_method);
  const int d = rt.env.d();
  std::optional<std::string> reference;
  for (const auto& n : names) {
    if (n == "policy") reference = n;
  }
  std::vector<MethodSpec> out;
  for (const auto& name : names) {
    MethodSpec m;
    m.name = name;
    m.mode = action_mode(cfg);
    m.step_size = cfg.eval.linear_step_size;
    m.n_steps = cfg.eval.linear_n_steps;
    if (name == "policy") {
      if (!checkpoint) throw UsageError("method 'policy' needs --checkpoint");
      if (checkpoint->meta.d != d) throw DimensionError("checkpoint d differs from config env.d");
      m.policy = checkpoint->policy;
    } else if (name == "untrained") {
      m.policy = LearnerState::initialize(d, cfg.train).policy;
    } else if (name == "random") {
      m.policy = random_policy(d);
    } else if (name == "linear" || name == "centroid" || name == "fitted") {
      m.kind = MethodSpec::Kind::linear;
      m.match_coverage_to = reference;
      if (name == "linear") {
        m.direction = rt.env.k_hyp;
      } else if (name == "centroid") {
        const auto split = cfg.eval.centroid_split == "midpoint" ? ClusterSplit::midpoint
                                                                 : ClusterSplit::extreme_buckets;
        const AgeClusters clusters = sample_age_clusters(*rt.oracle, rt.env.buckets, split,
                                                         cfg.eval.cluster_size, derive_seed(cfg.eval.seed, 0xC3));
        m.direction = centroid_direction(clusters.young, clusters.old);
      } else {
        Rng rng(derive_seed(cfg.eval.seed, 0xF17));
        std::vector<LatentVector> latents;
        std::vector<int> labels;
        const double mid = 0.5 * (rt.env.buckets.lo + rt.env.buckets.hi);
        for (int i = 0; i < cfg.eval.hyperplane_samples; ++i) {
          LatentVector s = project_to_shell(sample_latent(rng, d), d);
          labels.push_back(rt.oracle->age_of(s) >= mid ? 1 : 0);
          latents.push_back(std::move(s));
        }
        m.direction = fit_hyperplane(latents, labels);
      }
    } else {
      throw UsageError("unknown method '" + name +
                       "' (expected policy, untrained, random, linear, centroid, fitted)");
    }
    out.push_back(std::move(m));
  }
  return out;
}

json interval_json(const ConfidenceInterval& ci) {
  return {{"estimate", ci.estimate}, {"lo", ci.lo}, {"hi", ci.hi}};
}

std::vector<double> per_episode(const MethodResults& mr, double MetricsReport::*field) {
  std::vector<double> v;
  v.reserve(mr.episodes.size());
  for (const auto& ep : mr.episodes) v.push_back(ep.metrics.*field);
  return v;
}

// ---- subcommands ----------------------------------------------------------

struct TrainArgs {
  ConfigOptions config;
  std::string algo;
  std::string run_dir;
  std::optional<std::int64_t> total_steps;
  bool resume = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ConfigOptions co = a.config;
  if (!a.algo.empty()) co.sets.push_back("train.algo=" + a.algo);
  if (a.total_steps) co.sets.push_back("train.total_steps=" + std::to_string(*a.total_steps));
  const RunConfig cfg = co.load();
  Runtime rt = build_runtime(cfg);

  fs::path dir = a.run_dir.empty() ? fs::path(cfg.output_dir) / (cfg.run_name + "-" +
                                                                 std::string(to_string(cfg.train.algo)) +
                                                                 "-seed" + std::to_string(cfg.train.seed))
                                   : fs::path(a.run_dir);
  TrainOutputs outputs;
  outputs.run_dir = dir;
  outputs.config_hash = config_hash(cfg);
  if (a.resume) {
    const fs::path ck = dir / "checkpoint.json";
    if (!fs::exists(ck)) throw UsageError("--resume: no checkpoint at " + ck.string());
    outputs.resume = load_checkpoint(ck);
  } else {
    fs::create_directories(dir);
  }
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  if (!a.quiet) {
    outputs.on_update = [&out](const json& line) { out << line.dump() << '\n'; };
  }
  const RunArtifacts art = train(cfg.train, rt.env, *rt.oracle, outputs);
  const json summary = {{"run_dir", dir.string()},
                        {"config_hash", outputs.config_hash},
                        {"env_steps", art.env_steps},
                        {"episodes", art.episodes},
                        {"final_mean_return", art.curve.empty() ? 0.0 : art.curve.back().mean_return}};
  out << summary.dump() << '\n';
  return kOk;
}

struct RolloutArgs {
  std::string checkpoint;
  std::string config;
  std::string order = "asc";
  int episodes = 10;
  std::string out_path;
  bool log_latents = false;
  std::optional<std::uint64_t> seed;
};

int cmd_rollout(const RolloutArgs& a, std::ostream& out) {
  const fs::path ck_path(a.checkpoint);
  const RunConfig cfg = config_from_file(a.config.empty() ? config_beside(ck_path) : fs::path(a.config));
  const Conditioning order = conditioning_from_string(a.order);
  if (a.episodes < 1) throw UsageError("--episodes must be >= 1");
  const Checkpoint ck = load_checkpoint(ck_path);
  Runtime rt = build_runtime(cfg);
  if (ck.meta.d != rt.env.d()) throw DimensionError("checkpoint d differs from config env.d");

  const std::uint64_t seed = a.seed.value_or(cfg.eval.seed);
  const auto bases = evaluation_bases(seed, a.episodes, rt.env.d());
  std::ofstream file;
  std::ostream* sink = &out;
  if (!a.out_path.empty()) {
    const fs::path p(a.out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    file.open(p, std::ios::trunc);
    if (!file) throw Error("cannot write " + a.out_path);
    sink = &file;
  }
  TrajectoryWriter writer(*sink, a.log_latents);
  double total = 0.0;
  int successes = 0;
  for (int i = 0; i < a.episodes; ++i) {
    Rng rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + (order == Conditioning::ascending ? 0 : 1)));
    TrajectoryRecord rec =
        run_policy_episode(ck.policy, bases[static_cast<std::size_t>(i)], order, rt.env, *rt.oracle, rng,
                           action_mode(cfg), "policy");
    rec.episode = i;
    total += rec.episode_return();
    successes += rec.done_reason == DoneReason::success ? 1 : 0;
    writer.write(rec);
  }
  if (!a.out_path.empty()) {
    out << json{{"episodes", a.episodes},
                {"mean_return", total / a.episodes},
                {"success_rate", static_cast<double>(successes) / a.episodes},
                {"out", a.out_path}}
               .dump()
        << '\n';
  }
  return kOk;
}

struct EvalArgs {
  std::string run;
  std::optional<int> episodes;
  std::string report;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path dir(a.run);
  if (!fs::is_directory(dir)) throw ConfigError("run directory not found: " + dir.string());
  const RunConfig cfg = config_from_file(dir / "config.json");
  const Checkpoint ck = load_checkpoint(dir / "checkpoint.json");
  Runtime rt = build_runtime(cfg);
  const int n = a.episodes.value_or(cfg.eval.episodes);
  if (n < 1) throw UsageError("--episodes must be >= 1");

  const auto methods = build_methods({"policy", "untrained", "linear"}, cfg, rt, ck);
  const auto bases = evaluation_bases(cfg.eval.seed, n, rt.env.d());
  const Comparison cmp = compare(methods, bases, rt.env, *rt.oracle, cfg.eval.seed);

  const MethodResults& pol = find_method(cmp, "policy");
  const MethodResults& lin = find_method(cmp, "linear");
  const MethodResults& unt = find_method(cmp, "untrained");
  const auto cos_p = per_episode(pol, &MetricsReport::identity_cosine_mean);
  const auto cos_l = per_episode(lin, &MetricsReport::identity_cosine_mean);
  const auto vio_p = per_episode(pol, &MetricsReport::typicality_violation_rate);
  const auto vio_u = per_episode(unt, &MetricsReport::typicality_violation_rate);
  const auto boot_seed = derive_seed(cfg.eval.seed, 0xB007);

  json report = comparison_json(cmp);
  report.erase("episodes");
  report["checkpoint_step"] = ck.meta.train_step;
  report["config_hash"] = config_hash(cfg);
  report["n_bases"] = n;
  report["intervals"] = {
      {"identity_cosine_policy_minus_linear",
       interval_json(paired_bootstrap_mean_diff(cos_p, cos_l, cfg.eval.bootstrap_resamples, boot_seed))},
      {"violation_untrained_minus_policy",
       interval_json(paired_bootstrap_mean_diff(vio_u, vio_p, cfg.eval.bootstrap_resamples, boot_seed + 1))}};
  const fs::path report_path = a.report.empty() ? dir / "eval_report.json" : fs::path(a.report);
  write_text(report_path, report.dump(2) + "\n");
  fs::path csv_path = report_path;
  csv_path.replace_extension(".csv");
  write_text(csv_path, comparison_csv(cmp));
  out << comparison_csv(cmp);
  return kOk;
}

struct CompareArgs {
  ConfigOptions config;
  std::string methods;
  std::string out_path;
  std::string checkpoint;
  std::optional<int> episodes;
  bool log_latents = false;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const RunConfig cfg = a.config.load();
  Runtime rt = build_runtime(cfg);
  std::vector<std::string> names;
  std::stringstream ss(a.methods);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) names.push_back(item);
  }
  if (names.empty()) throw UsageError("--methods is empty");
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) ck = load_checkpoint(a.checkpoint);
  const auto methods = build_methods(names, cfg, rt, ck);
  const int n = a.episodes.value_or(cfg.eval.episodes);
  if (n < 1) throw UsageError("--episodes must be >= 1");
  const auto bases = evaluation_bases(cfg.eval.seed, n, rt.env.d());
  const Comparison cmp = compare(methods, bases, rt.env, *rt.oracle, cfg.eval.seed);
  const std::string csv = comparison_csv(cmp);
  if (a.out_path.empty()) {
    out << csv;
  } else {
    write_text(a.out_path, csv);
    write_text(a.out_path + ".json", comparison_json(cmp, a.log_latents).dump() + "\n");
    out << csv;
  }
  return kOk;
}

int cmd_oracle_check(const std::string& endpoint, double timeout_s, std::ostream& out) {
  RemoteOracle oracle(endpoint, std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000)));
  const Handshake& hs = oracle.handshake();
  const int d = oracle.dim();
  std::vector<LatentVector> probes = {Vector::Zero(d), sample_latent(0, d)};
  std::vector<double> single;
  for (const auto& p : probes) single.push_back(oracle.age_of(p));
  const auto batched = oracle.ages_of(probes);
  bool consistent = batched == single;
  if (hs.supports("identity")) {
    for (const auto& p : probes) {
      const FeatureVector f = oracle.identity_features(p);
      if (f.size() != oracle.feature_dim()) throw TransportError("protocol", "identity feature length mismatch");
    }
    const auto fb = oracle.identity_features(std::span<const LatentVector>(probes));
    for (std::size_t i = 0; i < probes.size(); ++i) {
      consistent = consistent && fb[i] == oracle.identity_features(probes[i]);
    }
  }
  out << json{{"ok", consistent},
              {"endpoint", endpoint},
              {"protocol", hs.protocol},
              {"d", hs.d},
              {"feature_dim", hs.feature_dim},
              {"ops", hs.ops},
              {"ages", single},
              {"batched_consistent", consistent}}
             .dump()
      << '\n';
  return consistent ? kOk : kRuntime;
}

int cmd_calibrate(const ConfigOptions& co, int samples, double quantile, std::ostream& out) {
  const RunConfig cfg = co.load();
  Runtime rt = build_runtime(cfg);
  const CalibrationResult r =
      calibrate_thresholds(rt.env, *rt.oracle, samples, derive_seed(cfg.train.seed, 0xCA1), quantile);
  out << json{{"P1", r.P1}, {"P2", r.P2}, {"quantile", r.quantile}, {"samples", r.samples},
              {"mean_drift", r.mean_drift}}
             .dump()
      << '\n';
  return kOk;
}

void report_error(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Goal-conditioned latent-space attribute steering: training, rollout and evaluation"};
  cli.name(argv.empty() ? "latent_steer" : fs::path(argv.front()).filename().string());
  cli.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = cli.add_subcommand("train", "Train a policy with PPO or A2C");
  train_args.config.attach(train_cmd, true);
  train_cmd->add_option("--algo", train_args.algo, "ppo or a2c")->check(CLI::IsMember({"ppo", "a2c"}));
  train_cmd->add_option("--run-dir", train_args.run_dir, "Output directory (default: output_dir/run_name-algo-seedN)");
  train_cmd->add_option("--total-steps", train_args.total_steps, "Environment step budget");
  train_cmd->add_flag("--resume", train_args.resume, "Continue from the run directory's checkpoint.json");
  train_cmd->add_flag("--quiet", train_args.quiet, "Only print the final summary line");

  RolloutArgs rollout_args;
  auto* rollout_cmd = cli.add_subcommand("rollout", "Run a trained policy and write trajectories as JSONL");
  rollout_cmd->add_option("--checkpoint", rollout_args.checkpoint, "Checkpoint file")->required();
  rollout_cmd->add_option("--config", rollout_args.config, "Config (default: config.json beside the checkpoint)");
  rollout_cmd->add_option("--order", rollout_args.order, "asc or dsc")
      ->check(CLI::IsMember({"asc", "dsc", "ascending", "descending"}));
  rollout_cmd->add_option("--episodes", rollout_args.episodes, "Number of episodes");
  rollout_cmd->add_option("--out", rollout_args.out_path, "Output JSONL (default: stdout)");
  rollout_cmd->add_flag("--log-latents", rollout_args.log_latents, "Include latents in the log");
  rollout_cmd->add_option("--seed", rollout_args.seed, "Base/noise seed (default: eval.seed)");

  EvalArgs eval_args;
  auto* eval_cmd = cli.add_subcommand("eval", "Evaluate a run directory against the baselines");
  eval_cmd->add_option("--run", eval_args.run, "Run directory")->required();
  eval_cmd->add_option("--episodes", eval_args.episodes, "Number of unseen bases (default: eval.episodes)");
  eval_cmd->add_option("--report", eval_args.report, "Report path (default: RUN/eval_report.json)");

  CompareArgs compare_args;
  auto* compare_cmd = cli.add_subcommand("compare", "Compare methods on a shared set of unseen bases");
  compare_args.config.attach(compare_cmd, true);
  compare_cmd->add_option("--methods", compare_args.methods,
                          "Comma list of policy, untrained, random, linear, centroid, fitted")
      ->required();
  compare_cmd->add_option("--out", compare_args.out_path, "CSV output (JSON mirror at OUT.json)");
  compare_cmd->add_option("--checkpoint", compare_args.checkpoint, "Checkpoint for the 'policy' method");
  compare_cmd->add_option("--episodes", compare_args.episodes, "Number of unseen bases");
  compare_cmd->add_flag("--log-latents", compare_args.log_latents, "Include latents in the JSON mirror");

  std::string endpoint;
  double timeout_s = 10.0;
  auto* oracle_cmd = cli.add_subcommand("oracle", "Remote oracle utilities");
  oracle_cmd->require_subcommand(1);
  auto* check_cmd = oracle_cmd->add_subcommand("check", "Handshake and probe a remote oracle");
  check_cmd->add_option("--endpoint", endpoint, "stdio:<command> or tcp://host:port")->required();
  check_cmd->add_option("--timeout", timeout_s, "Per-response timeout in seconds");

  ConfigOptions calib_config;
  int calib_samples = 20000;
  double calib_quantile = 0.95;
  auto* calib_cmd = cli.add_subcommand("calibrate-thresholds", "Estimate P1/P2 from random single-step drift");
  calib_config.attach(calib_cmd, true);
  calib_cmd->add_option("--samples", calib_samples, "Number of random steps")->check(CLI::PositiveNumber);
  calib_cmd->add_option("--quantile", calib_quantile, "Quantile used for P2")->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    cli.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << cli.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (rollout_cmd->parsed()) return cmd_rollout(rollout_args, out);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, out);
    if (compare_cmd->parsed()) return cmd_compare(compare_args, out);
    if (check_cmd->parsed()) return cmd_oracle_check(endpoint, timeout_s, out);
    if (calib_cmd->parsed()) return cmd_calibrate(calib_config, calib_samples, calib_quantile, out);
  } catch (const ConfigError& e) {
    report_error(err, "config", e.what());
    return kUsage;
  } catch (const UsageError& e) {
    report_error(err, "usage", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what());
    return kRuntime;
  }
  report_error(err, "usage", "no subcommand");
  return kUsage;
}

}  // namespace latent_steer::app
