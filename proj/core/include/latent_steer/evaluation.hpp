#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latent_steer/environment.hpp"
#include "latent_steer/policy.hpp"

namespace latent_steer {

struct TrajectoryStep {
  int index = 0;  // 1-based transition count
  std::optional<LatentVector> latent;
  double age = 0.0;
  int bucket = 0;
  double I_g = 0.0;
  double typicality_score = 0.0;
  double reward = 0.0;
};

struct TrajectoryRecord {
  std::string method;
  std::int64_t episode = 0;
  LatentVector base;  // the (possibly shell-projected) start latent
  Conditioning conditioning = Conditioning::ascending;
  double age_base = 0.0;
  int base_bucket = 0;
  std::vector<TrajectoryStep> steps;
  DoneReason done_reason = DoneReason::running;

  double episode_return() const;
};

struct MetricsReport {
  double bucket_coverage = 0.0;      // fraction of eligible buckets reached
  int buckets_reached = 0;
  int eligible = 0;
  double identity_cosine_mean = 1.0;
  double identity_cosine_min = 1.0;
  /// Mean cosine over the steps that first reach each eligible bucket (all
  /// steps when none does): the per-bucket outputs of a method.
  double bucket_cosine_mean = 1.0;
  double identity_sqdist = 0.0;      // mean I_g over steps
  double final_identity_sqdist = 0.0;
  double typicality_violation_rate = 0.0;  // fraction of steps outside the typical set
  double episode_return = 0.0;
  int steps = 0;
};

/// Eligible buckets reached by raw age (strictly beyond the base age in the
/// conditioning direction), recounted from the recorded steps.
int buckets_reached(const TrajectoryRecord& traj, const BucketSpec& spec);

/// Recomputes every metric from the oracle and the stored latents.
///
/// Cosine is taken between the identity features of each visited point and of
/// the base. A trajectory without steps is scored at the base point itself.
/// Throws UsageError when steps carry no latents.
MetricsReport evaluate_trajectory(const TrajectoryRecord& traj, Oracle& oracle, const EnvConfig& cfg);

enum class ActionMode { stochastic, mean };

/// Runs one environment episode under `policy`.
TrajectoryRecord run_policy_episode(const MlpParams& policy, const LatentVector& base,
                                    Conditioning conditioning, const EnvConfig& cfg, Oracle& oracle,
                                    Rng& rng, ActionMode mode, const std::string& method);

/// Open-loop walk s_i = s_0 ± i·step·k (sign from the conditioning), scored
/// with the environment's bookkeeping but never terminated early by a
/// catastrophe. Stops after `n_steps` or, if `stop_after_buckets` is set, at
/// the first step where that many eligible buckets have been reached.
TrajectoryRecord run_linear_episode(const LatentVector& base, Conditioning conditioning,
                                    const DirectionVector& k, double step_size, int n_steps,
                                    const EnvConfig& cfg, Oracle& oracle, const std::string& method,
                                    std::optional<int> stop_after_buckets = std::nullopt);

/// The fixed set of unseen evaluation bases: base i = sample_latent(derive_seed(seed, i)).
std::vector<LatentVector> evaluation_bases(std::uint64_t seed, int count, int d);

/// crc32 (hex) over the raw bytes of the bases, recorded in comparison output.
std::string bases_hash(std::span<const LatentVector> bases);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Summary summarize(std::span<const double> values);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double estimate = 0.0;
};

/// Paired percentile bootstrap of mean(a − b).
ConfidenceInterval paired_bootstrap_mean_diff(std::span<const double> a, std::span<const double> b,
                                              int resamples, std::uint64_t seed, double level = 0.95);

/// One method in a comparison run.
struct MethodSpec {
  enum class Kind { policy, linear };
  std::string name;
  Kind kind = Kind::policy;
  MlpParams policy;                      // Kind::policy
  ActionMode mode = ActionMode::stochastic;
  std::optional<DirectionVector> direction;  // Kind::linear
  double step_size = 0.25;
  int n_steps = 60;
  /// Truncate a linear walk at the coverage reached by this method on the
  /// same base and conditioning.
  std::optional<std::string> match_coverage_to;
};

struct EpisodeResult {
  std::int64_t base_index = 0;
  Conditioning conditioning = Conditioning::ascending;
  TrajectoryRecord trajectory;
  MetricsReport metrics;
};

struct MethodResults {
  std::string name;
  std::vector<EpisodeResult> episodes;  // ordered by (base_index, conditioning)
};

struct ComparisonRow {
  std::string method;
  std::string conditioning;  // "ascending", "descending" or "all"
  double identity_cosine_mean = 0.0;
  double identity_cosine_std = 0.0;
  double coverage_mean = 0.0;
  double violation_rate = 0.0;
  double return_mean = 0.0;
  std::int64_t episodes = 0;
};

struct Comparison {
  std::vector<MethodResults> methods;
  std::vector<ComparisonRow> rows;
  std::string bases_hash;
  std::uint64_t seed = 0;
};

/// Runs every method on each base under both conditionings. Methods that
/// match coverage must come after the method they reference.
Comparison compare(std::span<const MethodSpec> methods, std::span<const LatentVector> bases,
                   const EnvConfig& cfg, Oracle& oracle, std::uint64_t seed);

const MethodResults& find_method(const Comparison& cmp, const std::string& name);

nlohmann::json metrics_to_json(const MetricsReport& m);

std::string comparison_csv(const Comparison& cmp);
nlohmann::json comparison_json(const Comparison& cmp, bool include_latents = false);

}  // namespace latent_steer
