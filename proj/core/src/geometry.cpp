#include "latent_steer/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latent_steer/errors.hpp"

namespace latent_steer {

DirectionVector DirectionVector::from_unit(Vector v) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTolerance) {
    throw DegenerateInputError("direction vector is not unit norm");
  }
  return DirectionVector(std::move(v));
}

void TypicalSetSpec::validate() const {
  if (d < 1) throw DimensionError("typical set: d must be >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("typical set: epsilon must be positive");
  }
}

LatentVector sample_latent(std::uint64_t seed, int d) {
  Rng rng(seed);
  return sample_latent(rng, d);
}

LatentVector sample_latent(Rng& rng, int d) {
  if (d < 1) throw DimensionError("sample_latent: invalid dimension " + std::to_string(d));
  LatentVector s(d);
  for (int i = 0; i < d; ++i) s[i] = rng.normal();
  return s;
}

namespace {
void check_dim(const LatentVector& s, int d, const char* where) {
  if (s.size() != d) {
    throw DimensionError(std::string(where) + ": latent has length " + std::to_string(s.size()) +
                         ", expected " + std::to_string(d));
  }
}
}  // namespace

double typicality_score(const LatentVector& s, const TypicalSetSpec& spec) {
  check_dim(s, spec.d, "typicality_score");
  return 0.5 * std::abs(static_cast<double>(spec.d) - s.squaredNorm());
}

bool in_typical_set(const LatentVector& s, const TypicalSetSpec& spec) {
  return typicality_score(s, spec) <= spec.epsilon;
}

LatentVector project_to_shell(const LatentVector& s, int d) {
  check_dim(s, d, "project_to_shell");
  const double norm = s.norm();
  if (!(norm > 0.0)) throw DegenerateInputError("project_to_shell: zero vector");
  const double sq = s.squaredNorm();
  if (sq == static_cast<double>(d)) return s;
  return s * (std::sqrt(static_cast<double>(d)) / norm);
}

DirectionVector unit_normalize(const Vector& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateInputError("unit_normalize: zero or non-finite vector");
  }
  return DirectionVector(v / norm);
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace latent_steer
