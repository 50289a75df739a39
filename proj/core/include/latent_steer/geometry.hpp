#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "latent_steer/random.hpp"

namespace latent_steer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in the generator's latent space. Length equals the configured d.
using LatentVector = Vector;

/// Unit-norm latent direction. Only constructible through checked factories,
/// so every instance satisfies |‖v‖ - 1| <= kUnitTolerance.
class DirectionVector {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  /// Wraps `v`, throwing DegenerateInputError if it is not unit norm.
  static DirectionVector from_unit(Vector v);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  DirectionVector operator-() const { return DirectionVector(-values_); }

 private:
  explicit DirectionVector(Vector v) : values_(std::move(v)) {}
  friend DirectionVector unit_normalize(const Vector& v);

  Vector values_;
};

/// Gaussian (epsilon, 1)-typical set of N(0, I_d).
struct TypicalSetSpec {
  int d = 512;
  double epsilon = 3.0;

  void validate() const;
};

/// i.i.d. standard normal latent from a fresh Rng(seed).
LatentVector sample_latent(std::uint64_t seed, int d);
LatentVector sample_latent(Rng& rng, int d);

/// ½·|d − ‖s‖²|, in nats.
double typicality_score(const LatentVector& s, const TypicalSetSpec& spec);

/// Membership indicator; the boundary score == epsilon is inside.
bool in_typical_set(const LatentVector& s, const TypicalSetSpec& spec);

/// Rescales `s` onto the sphere of radius √d.
LatentVector project_to_shell(const LatentVector& s, int d);

DirectionVector unit_normalize(const Vector& v);

/// Cosine similarity with the zero-vector rule: 1 when both vectors are zero,
/// 0 when exactly one is.
double cosine_similarity(const Vector& a, const Vector& b);

}  // namespace latent_steer
