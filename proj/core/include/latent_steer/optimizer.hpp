#pragma once

#include <cstdint>

#include "latent_steer/geometry.hpp"

namespace latent_steer {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamConfig cfg);

  /// params ← params − lr·m̂/(√v̂ + ε)
  void step(Vector& params, const Vector& grad);

  const AdamConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }
  std::int64_t steps() const noexcept { return t_; }
  void restore(Vector m, Vector v, std::int64_t t);

 private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  std::int64_t t_ = 0;
};

/// Scales `grad` in place so its norm is at most `max_norm`; returns the pre-clip norm.
/// A non-positive `max_norm` disables clipping.
double clip_grad_norm(Vector& grad, double max_norm);

}  // namespace latent_steer
