#include "latent_steer/trainer.hpp"

#include <cstdio>
#include <deque>
#include <fstream>

#include "latent_steer/errors.hpp"

namespace latent_steer {

using nlohmann::json;

Checkpoint make_checkpoint(const LearnerState& learner, const TrainConfig& cfg, int d,
                           std::int64_t train_step, const std::string& config_hash) {
  Checkpoint c;
  c.policy = learner.policy;
  c.value = learner.value;
  c.meta.d = d;
  c.meta.seed = cfg.seed;
  c.meta.train_step = train_step;
  c.meta.config_hash = config_hash;
  c.meta.algo = std::string(to_string(cfg.algo));
  c.meta.extra["shuffle_rng"] = learner.shuffle_rng.state();

  const Eigen::Index np = learner.policy.net.parameter_count() + learner.policy.log_std.size();
  const Vector& m = learner.optimizer.first_moment();
  const Vector& v = learner.optimizer.second_moment();
  OptimizerSnapshot opt;
  opt.policy_m = m.head(np);
  opt.policy_v = v.head(np);
  opt.value_m = m.tail(m.size() - np);
  opt.value_v = v.tail(v.size() - np);
  opt.steps = learner.optimizer.steps();
  c.optimizer = std::move(opt);
  return c;
}

namespace {

std::string step_name(std::int64_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%010lld.json", static_cast<long long>(step));
  return buf;
}

LearnerState restore(const Checkpoint& c, const TrainConfig& cfg, int d) {
  if (c.meta.d != d) throw DimensionError("resume: checkpoint d differs from env d");
  LearnerState s = LearnerState::initialize(d, cfg);
  s.policy = c.policy;
  s.value = c.value;
  if (c.optimizer) {
    Vector m(s.optimizer.first_moment().size());
    Vector v(m.size());
    m << c.optimizer->policy_m, c.optimizer->value_m;
    v << c.optimizer->policy_v, c.optimizer->value_v;
    s.optimizer.restore(std::move(m), std::move(v), c.optimizer->steps);
  }
  if (c.meta.extra.contains("shuffle_rng")) {
    s.shuffle_rng.restore(c.meta.extra["shuffle_rng"].get<std::string>());
  }
  return s;
}

}  // namespace

RunArtifacts train(const TrainConfig& cfg, const EnvConfig& env_cfg, Oracle& oracle,
                   const TrainOutputs& outputs) {
  cfg.validate();
  env_cfg.validate();
  const int d = env_cfg.d();
  if (oracle.dim() != d) throw DimensionError("train: oracle dimension differs from env d");

  RunArtifacts art;
  std::int64_t start_step = 0;
  if (outputs.resume) {
    art.learner = restore(*outputs.resume, cfg, d);
    start_step = outputs.resume->meta.train_step;
  } else {
    art.learner = LearnerState::initialize(d, cfg);
  }

  // Resumed runs get a fresh env stream keyed by the resume step.
  const StartPool pool(derive_seed(cfg.seed, 0xB001), cfg.pool_size, d);
  VecEnv envs(env_cfg, oracle, pool, cfg.n_envs,
              derive_seed(cfg.seed, 0xE4F + static_cast<std::uint64_t>(start_step)),
              cfg.conditioning_switch_every);

  const bool write = !outputs.run_dir.empty();
  std::ofstream metrics;
  std::ofstream curve;
  if (write) {
    std::filesystem::create_directories(outputs.run_dir / "checkpoints");
    art.metrics_path = outputs.run_dir / "metrics.jsonl";
    art.curve_path = outputs.run_dir / "reward_curve.csv";
    const auto mode = outputs.resume ? std::ios::app : std::ios::trunc;
    metrics.open(art.metrics_path, std::ios::out | mode);
    curve.open(art.curve_path, std::ios::out | mode);
    if (!metrics || !curve) throw Error("train: cannot open output files in " + outputs.run_dir.string());
    if (!outputs.resume) curve << "step,mean_return,return_variance\n";
  }

  auto save = [&](const std::filesystem::path& path, std::int64_t step) {
    save_checkpoint(make_checkpoint(art.learner, cfg, d, step, outputs.config_hash), path);
    art.checkpoints.push_back(path);
  };

  std::deque<double> window;
  std::int64_t steps = start_step;
  std::int64_t updates = 0;
  const std::int64_t per_update = static_cast<std::int64_t>(cfg.horizon) * cfg.n_envs;
  try {
    while (steps < cfg.total_steps) {
      RolloutBuffer buffer = collect_rollout(art.learner.policy, art.learner.value, envs, cfg.horizon);
      steps += per_update;
      for (const FinishedEpisode& ep : envs.take_finished()) {
        window.push_back(ep.episode_return);
        if (window.size() > static_cast<std::size_t>(cfg.curve_window)) window.pop_front();
        ++art.episodes;
      }

      UpdateStats stats = cfg.algo == Algo::ppo ? ppo_update(buffer, art.learner, cfg)
                                                : a2c_update(buffer, art.learner, cfg);
      ++updates;

      double mean = 0.0;
      double var = 0.0;
      if (!window.empty()) {
        for (double r : window) mean += r;
        mean /= static_cast<double>(window.size());
        for (double r : window) var += (r - mean) * (r - mean);
        var /= static_cast<double>(window.size());
      }
      stats.mean_return = mean;
      art.curve.push_back({steps, mean, var});

      const json line = {{"step", steps},
                         {"episodes", art.episodes},
                         {"mean_return", mean},
                         {"policy_loss", stats.policy_loss},
                         {"value_loss", stats.value_loss},
                         {"entropy", stats.entropy},
                         {"clip_frac", stats.clip_fraction},
                         {"approx_kl", stats.approx_kl}};
      if (write) {
        metrics << line.dump() << '\n';
        metrics.flush();
        curve << steps << ',' << json(mean).dump() << ',' << json(var).dump() << '\n';
        curve.flush();
        if (updates % cfg.checkpoint_every == 0) save(outputs.run_dir / "checkpoints" / step_name(steps), steps);
      }
      if (outputs.on_update) outputs.on_update(line);
    }
  } catch (const Error&) {
    if (write) save(outputs.run_dir / "checkpoint.json", steps);
    throw;
  }

  art.env_steps = steps;
  art.pool_draws = envs.pool_draws();
  if (write) {
    save(outputs.run_dir / "checkpoints" / step_name(steps), steps);
    save(outputs.run_dir / "checkpoint.json", steps);
  }
  return art;
}

}  // namespace latent_steer
