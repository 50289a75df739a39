#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latent_steer/geometry.hpp"

namespace latent_steer {

/// Identity embedding of a generated face (or its synthetic stand-in).
using FeatureVector = Vector;

/// Latent-to-semantics service: the composition generator→age-regressor and
/// generator→identity-extractor, collapsed to one call each.
///
/// Implementations must be deterministic for a fixed latent. They are not
/// required to be thread-safe; share a remote oracle behind a mutex.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual int dim() const = 0;
  virtual int feature_dim() const = 0;

  /// Predicted age in years.
  virtual double age_of(const LatentVector& s) = 0;
  virtual FeatureVector identity_features(const LatentVector& s) = 0;

  virtual std::vector<double> ages_of(std::span<const LatentVector> latents);
  virtual std::vector<FeatureVector> identity_features(std::span<const LatentVector> latents);

  /// Short human-readable description (kind plus key parameters).
  virtual std::string describe() const = 0;
};

/// Parameters of the analytic oracle.
///
///   age(s)      = clamp(a·⟨k_age, s⟩ + b, age_min, age_max)
///   identity(s) = s − ⟨k_age, s⟩·k_age
///
/// `u` is orthogonal to `k_age`; the hyperplane handed to agents is tilted
/// toward it by `gamma`, which models attribute entanglement.
struct SyntheticOracleSpec {
  int d = 16;
  DirectionVector k_age = DirectionVector::from_unit(Vector::Unit(16, 0));
  double a = 3.0;
  double b = 30.0;
  double gamma = 0.0;
  DirectionVector u = DirectionVector::from_unit(Vector::Unit(16, 1));
  double age_min = 0.0;
  double age_max = 100.0;

  void validate() const;

  /// k_age and u drawn as a random orthonormal pair from `seed`.
  static SyntheticOracleSpec random(int d, std::uint64_t seed, double a, double b, double gamma);
};

class SyntheticOracle final : public Oracle {
 public:
  explicit SyntheticOracle(SyntheticOracleSpec spec);

  int dim() const override { return spec_.d; }
  int feature_dim() const override { return spec_.d; }

  double age_of(const LatentVector& s) override;
  FeatureVector identity_features(const LatentVector& s) override;
  using Oracle::identity_features;

  std::string describe() const override;

  const SyntheticOracleSpec& spec() const noexcept { return spec_; }

 private:
  SyntheticOracleSpec spec_;
};

/// unit_normalize(k_age + gamma·u): the estimated, entangled attribute direction.
DirectionVector entangled_hyperplane(const SyntheticOracleSpec& spec);

}  // namespace latent_steer
