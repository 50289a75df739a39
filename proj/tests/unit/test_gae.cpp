#include <gtest/gtest.h>

#include "latent_steer/errors.hpp"
#include "latent_steer/gae.hpp"
#include "test_support.hpp"

using namespace latent_steer;

TEST(Gae, TdZeroLimit) {
  Vector r(3), v(3), d(3);
  r << 1, -1, 0.5;
  v << 0.2, 0.4, -0.3;
  d << 0, 1, 0;
  const auto out = gae(r, v, d, 0.7, 0.9, 0.0);
  EXPECT_NEAR(out.advantages[0], 1 + 0.9 * 0.4 - 0.2, 1e-15);
  EXPECT_NEAR(out.advantages[1], -1 - 0.4, 1e-15);
  EXPECT_NEAR(out.advantages[2], 0.5 + 0.9 * 0.7 + 0.3, 1e-15);
  EXPECT_LE((out.returns - out.advantages - v).norm(), 1e-15);
}

TEST(Gae, MonteCarloLimit) {
  Vector r(4), v(4);
  r << 1, 2, 3, 4;
  v << 0.5, -0.5, 1, 2;
  const double g = 0.9, last = 1.5;
  const auto out = gae(r, v, Vector::Zero(4), last, g, 1.0);
  for (int t = 0; t < 4; ++t) {
    double disc = 0, f = 1;
    for (int k = t; k < 4; ++k, f *= g) disc += f * r[k];
    EXPECT_NEAR(out.advantages[t], disc + f * last - v[t], 1e-12);
  }
}

TEST(Gae, HandUnrolledTwoSteps) {
  Vector r(2), v(2);
  r << 1, 1;
  v << 0.5, 0.5;
  const auto out = gae(r, v, Vector::Zero(2), 0.0, 0.99, 0.95);
  const double d1 = 1 - 0.5;
  const double d0 = 1 + 0.99 * 0.5 - 0.5;
  EXPECT_NEAR(out.advantages[1], d1, 1e-12);
  EXPECT_NEAR(out.advantages[0], d0 + 0.99 * 0.95 * d1, 1e-12);
}

TEST(Gae, MatchesBruteForce) {
  Rng rng(21);
  for (int inst = 0; inst < 200; ++inst) {
    const int T = 1 + static_cast<int>(rng.index(32));
    Vector r(T), v(T), d(T);
    for (int t = 0; t < T; ++t) {
      r[t] = rng.normal();
      v[t] = rng.normal();
      d[t] = rng.uniform() < 0.15 ? 1.0 : 0.0;
    }
    const double last = rng.normal(), g = 0.8 + 0.2 * rng.uniform(), l = rng.uniform();
    const auto fast = gae(r, v, d, last, g, l);
    const auto slow = oracle_ref::brute_force_gae(r, v, d, last, g, l);
    ASSERT_LE((fast.advantages - slow.advantages).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_LE((fast.returns - slow.returns).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Gae, LengthMismatch) {
  EXPECT_THROW(gae(Vector::Zero(3), Vector::Zero(2), Vector::Zero(3), 0, 0.9, 0.9), DimensionError);
}
