#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latent_steer/algorithms.hpp"
#include "latent_steer/checkpoint.hpp"

namespace latent_steer {

struct TrainOutputs {
  /// Run directory; metrics.jsonl, reward_curve.csv, checkpoint.json and
  /// checkpoints/ are written here. Empty disables all file output.
  std::filesystem::path run_dir;
  std::string config_hash;
  /// Called after every update with the metrics line just written.
  std::function<void(const nlohmann::json&)> on_update;
  /// Resume from this checkpoint instead of a fresh initialization.
  std::optional<Checkpoint> resume;
};

struct CurvePoint {
  std::int64_t step = 0;
  double mean_return = 0.0;
  double return_variance = 0.0;
};

struct RunArtifacts {
  LearnerState learner;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t pool_draws = 0;
  std::vector<CurvePoint> curve;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path metrics_path;
  std::filesystem::path curve_path;
};

/// Runs collect → update until `cfg.total_steps` environment steps.
///
/// Bitwise deterministic for a fixed (cfg, env_cfg, oracle). On an oracle or
/// numerical failure the latest parameters are saved to checkpoint.json in
/// the run directory before the error propagates.
RunArtifacts train(const TrainConfig& cfg, const EnvConfig& env_cfg, Oracle& oracle,
                   const TrainOutputs& outputs = {});

Checkpoint make_checkpoint(const LearnerState& learner, const TrainConfig& cfg, int d,
                           std::int64_t train_step, const std::string& config_hash);

}  // namespace latent_steer
