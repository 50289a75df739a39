#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latent_steer/errors.hpp"
#include "latent_steer/geometry.hpp"
#include "test_support.hpp"

using namespace latent_steer;

namespace {

// Ones everywhere and a chosen first entry, so ‖s‖² is exact in binary.
Vector with_sqnorm(int d, double sq) {
  Vector s = Vector::Ones(d);
  s[0] = std::sqrt(sq - (d - 1));
  return s;
}

}  // namespace

TEST(SampleLatent, DeterministicPerSeed) {
  const LatentVector a = sample_latent(42, 4);
  const LatentVector b = sample_latent(42, 4);
  ASSERT_EQ(a.size(), 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_latent(43, 4));
}

TEST(SampleLatent, RejectsZeroDimension) { EXPECT_THROW(sample_latent(1, 0), DimensionError); }

TEST(SampleLatent, ChiSquaredMoments) {
  const int n = 10000;
  const int d = 64;
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) sq[static_cast<std::size_t>(i)] = sample_latent(1000 + i, d).squaredNorm();
  const double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sq) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_NEAR(mean, 64.0, 1.0);
  EXPECT_NEAR(var, 128.0, 10.0);
}

TEST(Typicality, SpecExamples) {
  const TypicalSetSpec spec{512, 3.0};
  EXPECT_EQ(typicality_score(with_sqnorm(512, 512), spec), 0.0);
  EXPECT_NEAR(typicality_score(with_sqnorm(512, 520), spec), 4.0, 1e-9);
  EXPECT_EQ(typicality_score(Vector::Zero(512), spec), 256.0);
  EXPECT_TRUE(in_typical_set(with_sqnorm(512, 512), spec));
  EXPECT_FALSE(in_typical_set(with_sqnorm(512, 520), spec));
}

TEST(Typicality, BoundaryIsInclusive) {
  // ‖s‖² lands on 518 exactly, so the score sits on ε.
  Vector s = Vector::Ones(512);
  s[0] = 2.0;
  s[1] = 2.0;  // 510 + 4 + 4 = 518
  const TypicalSetSpec spec{512, 3.0};
  EXPECT_EQ(s.squaredNorm(), 518.0);
  EXPECT_EQ(typicality_score(s, spec), 3.0);
  EXPECT_TRUE(in_typical_set(s, spec));
}

TEST(Typicality, DimensionMismatchThrows) {
  EXPECT_THROW(typicality_score(Vector::Zero(3), TypicalSetSpec{4, 1.0}), DimensionError);
  EXPECT_THROW(in_typical_set(Vector::Zero(3), TypicalSetSpec{4, 1.0}), DimensionError);
}

TEST(Typicality, SpecValidation) {
  EXPECT_THROW((TypicalSetSpec{0, 1.0}.validate()), DimensionError);
  EXPECT_THROW((TypicalSetSpec{4, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((TypicalSetSpec{4, 0.5}.validate()));
}

TEST(Typicality, PermutationAndSignInvariance) {
  Rng rng(5);
  const TypicalSetSpec spec{32, 3.0};
  for (int trial = 0; trial < 50; ++trial) {
    Vector s = sample_latent(rng, 32);
    const double base = typicality_score(s, spec);
    std::vector<double> v(s.data(), s.data() + s.size());
    std::reverse(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); i += 3) v[i] = -v[i];
    const Vector t = Eigen::Map<Vector>(v.data(), 32);
    EXPECT_NEAR(typicality_score(t, spec), base, 1e-12);
  }
}

TEST(Typicality, EmpiricalFractionMatchesChiSquared) {
  const TypicalSetSpec spec{512, 3.0};
  int inside = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) inside += in_typical_set(sample_latent(50'000 + i, 512), spec) ? 1 : 0;
  const double analytic = oracle_ref::chi2_probability_between(512, 506.0, 518.0);
  EXPECT_NEAR(static_cast<double>(inside) / n, analytic, 0.03);
  // normal approximation of χ²_512 (sd 32): 2Φ(6/32) − 1
  EXPECT_NEAR(analytic, std::erf(6.0 / 32.0 / std::sqrt(2.0)), 0.002);
}

TEST(Typicality, DistinctSeedsNearlyOrthogonal) {
  int below = 0;
  const int pairs = 2000;
  for (int i = 0; i < pairs; ++i) {
    below += std::abs(cosine_similarity(sample_latent(2 * i, 512), sample_latent(2 * i + 1, 512))) < 0.2;
  }
  EXPECT_GE(static_cast<double>(below) / pairs, 0.999);
}

TEST(ProjectToShell, Examples) {
  Vector s(2);
  s << 3, 4;
  const LatentVector p = project_to_shell(s, 2);
  EXPECT_NEAR(p[0], 3 * std::sqrt(2.0) / 5, 1e-15);
  EXPECT_NEAR(p[1], 4 * std::sqrt(2.0) / 5, 1e-15);
  EXPECT_NEAR(p.norm(), std::sqrt(2.0), 1e-15);

  Vector on(2);
  on << 1, 1;
  EXPECT_EQ(project_to_shell(on, 2), on);
  EXPECT_THROW(project_to_shell(Vector::Zero(2), 2), DegenerateInputError);
}

TEST(ProjectToShell, AlwaysTypical) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(600));
    const Vector s = (0.01 + 10 * rng.uniform()) * sample_latent(rng, d);
    const LatentVector p = project_to_shell(s, d);
    EXPECT_TRUE(in_typical_set(p, TypicalSetSpec{d, 1e-6}));
    EXPECT_NEAR(typicality_score(p, TypicalSetSpec{d, 1.0}), 0.0, 1e-9 * d);
  }
}

TEST(UnitNormalize, Examples) {
  Vector a(3);
  a << 0, 3, 0;
  EXPECT_EQ(unit_normalize(a).values(), Vector::Unit(3, 1));
  Vector b(2);
  b << 1, 1;
  const DirectionVector u = unit_normalize(b);
  EXPECT_NEAR(u[0], 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(u[1], 1 / std::sqrt(2.0), 1e-15);
  EXPECT_LE((unit_normalize(u.values()).values() - u.values()).norm(), 1e-12);
  EXPECT_THROW(unit_normalize(Vector::Zero(4)), DegenerateInputError);
}

TEST(DirectionVector, UnitInvariantChecked) {
  EXPECT_THROW(DirectionVector::from_unit(Vector::Constant(2, 1.0)), DegenerateInputError);
  EXPECT_NO_THROW(DirectionVector::from_unit(Vector::Unit(3, 2)));
}

TEST(Cosine, ZeroVectorRule) {
  EXPECT_EQ(cosine_similarity(Vector::Zero(3), Vector::Zero(3)), 1.0);
  EXPECT_EQ(cosine_similarity(Vector::Zero(3), Vector::Unit(3, 0)), 0.0);
  EXPECT_NEAR(cosine_similarity(Vector::Unit(3, 0), -Vector::Unit(3, 0)), -1.0, 1e-15);
}
