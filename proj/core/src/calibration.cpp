#include "latent_steer/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "latent_steer/errors.hpp"
#include "latent_steer/random.hpp"

namespace latent_steer {

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("quantile_of: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("quantile_of: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CalibrationResult calibrate_thresholds(const EnvConfig& cfg, Oracle& oracle, int samples,
                                       std::uint64_t seed, double quantile, double soft_ratio) {
  if (samples < 1) throw UsageError("calibrate_thresholds: samples must be >= 1");
  if (!(soft_ratio > 0.0 && soft_ratio < 1.0)) {
    throw UsageError("calibrate_thresholds: soft_ratio must lie in (0, 1)");
  }
  const int d = cfg.d();
  Rng start_rng(derive_seed(seed, 1));
  Rng action_rng(derive_seed(seed, 2));
  std::vector<double> drift;
  drift.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const LatentVector s0 = project_to_shell(sample_latent(start_rng, d), d);
    const Conditioning c = i % 2 == 0 ? Conditioning::ascending : Conditioning::descending;
    Vector flat(d + 2);
    for (Eigen::Index j = 0; j < flat.size(); ++j) flat[j] = action_rng.normal();
    ActionVector a = ActionVector::from_flat(flat);
    if (cfg.normalize_k_gen) a.k_gen = unit_normalize(a.k_gen).values();
    const LatentVector s1 = transition(s0, a, signed_hyperplane(cfg.k_hyp, c), cfg.T);
    drift.push_back(identity_distance(oracle.identity_features(s1), oracle.identity_features(s0)));
  }
  CalibrationResult out;
  out.samples = samples;
  out.quantile = quantile;
  double sum = 0.0;
  for (double v : drift) sum += v;
  out.mean_drift = sum / samples;
  out.P2 = quantile_of(std::move(drift), quantile);
  out.P1 = out.P2 * soft_ratio;
  return out;
}

}  // namespace latent_steer
