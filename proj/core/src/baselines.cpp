#include "latent_steer/baselines.hpp"

#include <cmath>
#include <limits>

#include "latent_steer/errors.hpp"

namespace latent_steer {

std::vector<LatentVector> linear_traversal(const LatentVector& s_base, const DirectionVector& k,
                                           double step_size, int n_steps) {
  if (n_steps < 1) throw UsageError("linear_traversal: n_steps must be >= 1");
  if (k.size() != s_base.size()) throw DimensionError("linear_traversal: direction length mismatch");
  std::vector<LatentVector> points;
  points.reserve(static_cast<std::size_t>(n_steps));
  for (int i = 1; i <= n_steps; ++i) {
    points.push_back(s_base + (static_cast<double>(i) * step_size) * k.values());
  }
  return points;
}

std::int64_t shell_exit_index(const LatentVector& s_base, const DirectionVector& k, double step_size,
                              const TypicalSetSpec& spec) {
  if (k.size() != s_base.size() || s_base.size() != spec.d) {
    throw DimensionError("shell_exit_index: length mismatch");
  }
  const double proj = s_base.dot(k.values());
  if (proj < 0.0 || !(step_size > 0.0)) {
    throw UsageError("shell_exit_index: needs <s_base, k> >= 0 and step_size > 0");
  }
  // Exit when ‖s_i‖² > d + 2ε (squared norm only grows, so the lower edge is never hit after start).
  const double limit = static_cast<double>(spec.d) + 2.0 * spec.epsilon;
  const double c = s_base.squaredNorm() - limit;
  const double b = 2.0 * step_size * proj;
  const double a = step_size * step_size;
  // Smallest i >= 1 with a·i² + b·i + c > 0.
  const double root = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
  auto value = [&](std::int64_t i) {
    const double x = static_cast<double>(i);
    return s_base.squaredNorm() + 2.0 * x * step_size * proj + x * x * step_size * step_size;
  };
  std::int64_t i = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(root)));
  // Settle rounding at the boundary against the exact membership rule.
  while (i > 1 && 0.5 * std::abs(spec.d - value(i - 1)) > spec.epsilon) --i;
  while (0.5 * std::abs(spec.d - value(i)) <= spec.epsilon) ++i;
  return i;
}

DirectionVector centroid_direction(std::span<const LatentVector> group_a,
                                   std::span<const LatentVector> group_b) {
  if (group_a.empty() || group_b.empty()) throw UsageError("centroid_direction: empty group");
  const Eigen::Index d = group_a.front().size();
  Vector mean_a = Vector::Zero(d);
  Vector mean_b = Vector::Zero(d);
  for (const auto& s : group_a) {
    if (s.size() != d) throw DimensionError("centroid_direction: ragged group");
    mean_a += s;
  }
  for (const auto& s : group_b) {
    if (s.size() != d) throw DimensionError("centroid_direction: ragged group");
    mean_b += s;
  }
  mean_a /= static_cast<double>(group_a.size());
  mean_b /= static_cast<double>(group_b.size());
  const Vector diff = mean_b - mean_a;
  if (!(diff.norm() > 1e-12 * (1.0 + mean_a.norm()))) {
    throw DegenerateInputError("centroid_direction: identical centroids");
  }
  return unit_normalize(diff);
}

DirectionVector fit_hyperplane(std::span<const LatentVector> latents, std::span<const int> labels,
                               const HyperplaneFitOptions& options) {
  if (latents.size() != labels.size() || latents.empty()) {
    throw UsageError("fit_hyperplane: latents and labels must be non-empty and equal length");
  }
  const Eigen::Index d = latents.front().size();
  const Eigen::Index n = static_cast<Eigen::Index>(latents.size());
  Matrix x(d + 1, n);  // last row is the bias input
  Vector y(n);
  bool has0 = false;
  bool has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = latents[static_cast<std::size_t>(i)];
    if (s.size() != d) throw DimensionError("fit_hyperplane: ragged latents");
    x.col(i).head(d) = s;
    x(d, i) = 1.0;
    const int label = labels[static_cast<std::size_t>(i)];
    if (label != 0 && label != 1) throw UsageError("fit_hyperplane: labels must be 0 or 1");
    y[i] = label;
    has0 |= label == 0;
    has1 |= label == 1;
  }
  if (!has0 || !has1) throw UsageError("fit_hyperplane: both labels must be present");
  {
    const Vector first = x.col(0);
    bool all_same = true;
    for (Eigen::Index i = 1; i < n && all_same; ++i) all_same = x.col(i) == first;
    if (all_same) throw DegenerateInputError("fit_hyperplane: all latents identical");
  }

  // Lipschitz bound of the mean logistic loss gradient: ¼·max‖x_i‖² + l2.
  const double lipschitz = 0.25 * x.colwise().squaredNorm().maxCoeff() + options.l2;
  const double step = 1.0 / lipschitz;
  Vector w = Vector::Zero(d + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector z = x.transpose() * w;
    const Vector p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Vector grad = inv_n * (x * (p - y));
    grad.head(d) += options.l2 * w.head(d);  // bias unregularized
    if (grad.norm() < options.tolerance) break;
    w -= step * grad;
  }
  if (!w.allFinite()) throw NumericalError("fit_hyperplane: diverged");
  return unit_normalize(w.head(d));
}

AgeClusters sample_age_clusters(Oracle& oracle, const BucketSpec& buckets, ClusterSplit split,
                                int per_cluster, std::uint64_t seed, std::int64_t max_draws) {
  if (per_cluster < 1) throw UsageError("sample_age_clusters: per_cluster must be >= 1");
  const int d = oracle.dim();
  const double mid = 0.5 * (buckets.lo + buckets.hi);
  const int top = buckets.count() - 1;
  Rng rng(seed);
  AgeClusters out;
  const auto need = static_cast<std::size_t>(per_cluster);
  while (out.young.size() < need || out.old.size() < need) {
    if (out.draws >= max_draws) {
      throw DegenerateInputError("sample_age_clusters: could not fill both clusters");
    }
    ++out.draws;
    LatentVector s = project_to_shell(sample_latent(rng, d), d);
    const double age = oracle.age_of(s);
    bool young = false;
    bool old = false;
    if (split == ClusterSplit::midpoint) {
      young = age < mid;
      old = !young;
    } else {
      const int b = bucket_of(age, buckets);
      young = b == 0;
      old = b == top;
    }
    if (young && out.young.size() < need) out.young.push_back(std::move(s));
    else if (old && out.old.size() < need) out.old.push_back(std::move(s));
  }
  return out;
}

}  // namespace latent_steer
