#include <algorithm>
#include <cmath>
#include <sstream>

#include "latent_steer/errors.hpp"
#include "latent_steer/oracle.hpp"

namespace latent_steer {

std::vector<double> Oracle::ages_of(std::span<const LatentVector> latents) {
  std::vector<double> out;
  out.reserve(latents.size());
  for (const auto& s : latents) out.push_back(age_of(s));
  return out;
}

std::vector<FeatureVector> Oracle::identity_features(std::span<const LatentVector> latents) {
  std::vector<FeatureVector> out;
  out.reserve(latents.size());
  for (const auto& s : latents) out.push_back(identity_features(s));
  return out;
}

void SyntheticOracleSpec::validate() const {
  if (d < 1) throw DimensionError("synthetic oracle: d must be >= 1");
  if (k_age.size() != d || u.size() != d) {
    throw DimensionError("synthetic oracle: direction length differs from d");
  }
  if (a == 0.0 || !std::isfinite(a)) throw ConfigError("synthetic oracle: a must be finite and nonzero");
  if (!std::isfinite(b)) throw ConfigError("synthetic oracle: b must be finite");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("synthetic oracle: gamma must be >= 0");
  if (std::abs(k_age.values().dot(u.values())) > 1e-9) {
    throw ConfigError("synthetic oracle: u must be orthogonal to k_age");
  }
  if (!(age_min < age_max)) throw ConfigError("synthetic oracle: age_min must be < age_max");
}

SyntheticOracleSpec SyntheticOracleSpec::random(int d, std::uint64_t seed, double a, double b,
                                                double gamma) {
  if (d < 2) throw DimensionError("synthetic oracle: random directions need d >= 2");
  Rng rng(seed);
  const DirectionVector k = unit_normalize(sample_latent(rng, d));
  Vector raw = sample_latent(rng, d);
  raw -= raw.dot(k.values()) * k.values();
  // One re-orthogonalization pass brings ⟨k, u⟩ to rounding level.
  Vector u = unit_normalize(raw).values();
  u -= u.dot(k.values()) * k.values();

  SyntheticOracleSpec spec;
  spec.d = d;
  spec.k_age = k;
  spec.u = unit_normalize(u);
  spec.a = a;
  spec.b = b;
  spec.gamma = gamma;
  spec.validate();
  return spec;
}

SyntheticOracle::SyntheticOracle(SyntheticOracleSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

double SyntheticOracle::age_of(const LatentVector& s) {
  if (s.size() != spec_.d) throw DimensionError("synthetic oracle: latent dimension mismatch");
  const double age = spec_.a * spec_.k_age.values().dot(s) + spec_.b;
  return std::clamp(age, spec_.age_min, spec_.age_max);
}

FeatureVector SyntheticOracle::identity_features(const LatentVector& s) {
  if (s.size() != spec_.d) throw DimensionError("synthetic oracle: latent dimension mismatch");
  const Vector& k = spec_.k_age.values();
  return s - k.dot(s) * k;
}

std::string SyntheticOracle::describe() const {
  std::ostringstream out;
  out << "synthetic(d=" << spec_.d << ", a=" << spec_.a << ", b=" << spec_.b
      << ", gamma=" << spec_.gamma << ")";
  return out.str();
}

DirectionVector entangled_hyperplane(const SyntheticOracleSpec& spec) {
  if (spec.gamma == 0.0) return spec.k_age;
  return unit_normalize(spec.k_age.values() + spec.gamma * spec.u.values());
}

}  // namespace latent_steer
