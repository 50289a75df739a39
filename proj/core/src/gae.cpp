#include "latent_steer/gae.hpp"

#include "latent_steer/errors.hpp"

namespace latent_steer {

AdvantageEstimate gae(const Vector& rewards, const Vector& values, const Vector& dones,
                      double last_value, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || dones.size() != n) throw DimensionError("gae: length mismatch");
  AdvantageEstimate out;
  out.advantages = Vector::Zero(n);
  double next_value = last_value;
  double next_adv = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double not_done = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * not_done * next_value - values[t];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[t] = next_adv;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

}  // namespace latent_steer
