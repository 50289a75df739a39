#include "latent_steer/optimizer.hpp"

#include <cmath>

#include "latent_steer/errors.hpp"

namespace latent_steer {

Adam::Adam(Eigen::Index size, AdamConfig cfg)
    : cfg_(cfg), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& params, const Vector& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw DimensionError("adam: parameter length mismatch");
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate * std::sqrt(bc2) / bc1;
  params.array() -= lr * m_.array() / (v_.array().sqrt() + cfg_.epsilon);
}

void Adam::restore(Vector m, Vector v, std::int64_t t) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw DimensionError("adam: restore length mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double clip_grad_norm(Vector& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / (norm + 1e-12);
  return norm;
}

}  // namespace latent_steer
