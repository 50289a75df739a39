#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latent_steer/environment.hpp"
#include "latent_steer/geometry.hpp"
#include "latent_steer/oracle.hpp"

namespace latent_steer {

/// s_i = s_base + i·step_size·k for i = 1..n_steps.
std::vector<LatentVector> linear_traversal(const LatentVector& s_base, const DirectionVector& k,
                                           double step_size, int n_steps);

/// First index i >= 1 at which the linear walk leaves the typical set, from
/// the closed form ‖s_i‖² = ‖s‖² + 2iβ⟨s,k⟩ + i²β². Requires ⟨s,k⟩ >= 0 and
/// β > 0, where the squared norm is increasing in i.
std::int64_t shell_exit_index(const LatentVector& s_base, const DirectionVector& k, double step_size,
                              const TypicalSetSpec& spec);

/// unit(mean(group_b) − mean(group_a)).
DirectionVector centroid_direction(std::span<const LatentVector> group_a,
                                   std::span<const LatentVector> group_b);

struct HyperplaneFitOptions {
  double l2 = 1e-3;
  double tolerance = 1e-6;  // on the gradient norm
  int max_iterations = 200'000;
};

/// Logistic-regression separator by full-batch gradient descent; returns the
/// unit normal of the weight vector (pointing toward label 1).
DirectionVector fit_hyperplane(std::span<const LatentVector> latents, std::span<const int> labels,
                               const HyperplaneFitOptions& options = {});

enum class ClusterSplit {
  midpoint,         // age below / at-or-above the midpoint of the bucket range
  extreme_buckets,  // age in the lowest / highest bucket (clamped)
};

struct AgeClusters {
  std::vector<LatentVector> young;
  std::vector<LatentVector> old;
  std::int64_t draws = 0;
};

/// Samples shell-projected latents from `seed` until both clusters hold
/// `per_cluster` points.
AgeClusters sample_age_clusters(Oracle& oracle, const BucketSpec& buckets, ClusterSplit split,
                                int per_cluster, std::uint64_t seed, std::int64_t max_draws = 10'000'000);

}  // namespace latent_steer
