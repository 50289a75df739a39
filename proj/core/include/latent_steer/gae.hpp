#pragma once

#include <utility>

#include "latent_steer/geometry.hpp"

namespace latent_steer {

struct AdvantageEstimate {
  Vector advantages;
  Vector returns;  // advantages + values
};

/// Generalized advantage estimation over one environment's sequence.
///
///   δ_t = r_t + γ(1 − done_t)V_{t+1} − V_t,   V_T = last_value
///   A_t = δ_t + γλ(1 − done_t)A_{t+1}
///
/// done_t marks that the episode ended on step t.
AdvantageEstimate gae(const Vector& rewards, const Vector& values, const Vector& dones,
                      double last_value, double gamma, double lambda);

}  // namespace latent_steer
