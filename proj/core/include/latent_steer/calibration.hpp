#pragma once

#include <cstdint>
#include <vector>

#include "latent_steer/environment.hpp"

namespace latent_steer {

struct CalibrationResult {
  double P1 = 0.0;
  double P2 = 0.0;
  double quantile = 0.95;
  int samples = 0;
  double mean_drift = 0.0;
};

/// Identity thresholds from single-step drift: shell-projected starts, one
/// N(0, I) action each, I_g of the resulting point. P2 is the requested
/// quantile of the drift and P1 = P2·soft_ratio.
CalibrationResult calibrate_thresholds(const EnvConfig& cfg, Oracle& oracle, int samples,
                                       std::uint64_t seed, double quantile = 0.95,
                                       double soft_ratio = 750.0 / 900.0);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile_of(std::vector<double> values, double q);

}  // namespace latent_steer
