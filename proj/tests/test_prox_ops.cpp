#include "tvgsr/prox_ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace tvgsr;
using Vec = ProxVector;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(d);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Bisection on s in [0, max|z|] for sum max(0, |z_j| - s) = eta.
Vec l1_projection_by_bisection(const Vec& z, double eta) {
  if (z.lpNorm<1>() <= eta) return z;
  double lo = 0.0, hi = z.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mass = (z.cwiseAbs().array() - mid).max(0.0).sum();
    (mass > eta ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  return z.unaryExpr([s](double x) { return std::copysign(std::max(0.0, std::abs(x) - s), x); });
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// f(out) + ||out - z||^2 / (2 gamma) <= f(y) + ||y - z||^2 / (2 gamma) for candidates y.
void expect_variational(const std::function<double(const Vec&)>& f, const Vec& z, const Vec& out, double gamma,
                        const std::function<Vec(std::mt19937_64&)>& candidate, std::mt19937_64& rng) {
  const double best = f(out) + (out - z).squaredNorm() / (2.0 * gamma);
  ASSERT_TRUE(std::isfinite(best));
  for (int c = 0; c < 100; ++c) {
    const Vec y = candidate(rng);
    const double val = f(y) + (y - z).squaredNorm() / (2.0 * gamma);
    EXPECT_LE(best, val + 1e-9);
  }
}

}  // namespace

TEST(ProjectL2Ball, Examples) {
  const L2Ball ball(vec({0.0, 0.0}), 1.0);
  EXPECT_TRUE(project_l2_ball(ball, vec({3, 4})).isApprox(vec({0.6, 0.8}), 1e-15));
  EXPECT_EQ(project_l2_ball(ball, vec({0.0, 0.0})), vec({0.0, 0.0}));
  EXPECT_EQ(project_l2_ball(ball, vec({0.3, -0.2})), vec({0.3, -0.2}));
  const L2Ball shifted(vec({1.0, 2.0}), 0.0);
  EXPECT_EQ(project_l2_ball(shifted, vec({1.0, 2.0})), vec({1.0, 2.0}));
  EXPECT_THROW(L2Ball(vec({0.0}), -1.0), std::invalid_argument);
  EXPECT_THROW(project_l2_ball(ball, vec({1.0})), std::invalid_argument);
}

TEST(ProjectL2Ball, FeasibleIdempotentLipschitz) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index d = 1 + t % 20;
    const L2Ball ball(random_vec(rng, d), std::abs(random_vec(rng, 1)[0]));
    const Vec a = random_vec(rng, d, 3.0), b = random_vec(rng, d, 3.0);
    const Vec pa = project_l2_ball(ball, a), pb = project_l2_ball(ball, b);
    EXPECT_LE((pa - ball.center).norm(), ball.radius * (1 + 1e-12));
    EXPECT_LE((project_l2_ball(ball, pa) - pa).norm(), 1e-12);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() * (1 + 1e-12));
  }
}

TEST(ProjectL1Ball, Examples) {
  EXPECT_EQ(project_l1_ball(L1Ball(1.0), vec({0.2, -0.3})), vec({0.2, -0.3}));
  EXPECT_TRUE(project_l1_ball(L1Ball(1.0), vec({3, -1})).isApprox(vec({1, 0})));
  EXPECT_EQ(project_l1_ball(L1Ball(1.0), vec({0, 0, 0})), vec({0, 0, 0}));
  EXPECT_EQ(project_l1_ball(L1Ball(0.0), vec({0.5, -2})), vec({0, 0}));
  EXPECT_THROW(L1Ball(-0.1), std::invalid_argument);
}

TEST(ProjectL1Ball, WaterFillingLevelForThreeMinusOne) {
  // s = 2 solves max(0, 3 - s) + max(0, 1 - s) = 1; check against the oracle.
  const Vec oracle = l1_projection_by_bisection(vec({3, -1}), 1.0);
  EXPECT_NEAR((oracle - vec({1, 0})).norm(), 0.0, 1e-12);
}

TEST(ProjectL1Ball, MatchesBisectionOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index d = 1 + t % 50;
    const Vec z = random_vec(rng, d, 2.0);
    const double eta = u(rng) * z.lpNorm<1>() * 1.2;
    const Vec got = project_l1_ball(L1Ball(eta), z);
    EXPECT_LE((got - l1_projection_by_bisection(z, eta)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ProjectL1Ball, FeasibleIdempotentLipschitz) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index d = 1 + t % 30;
    const L1Ball ball(1.5);
    const Vec a = random_vec(rng, d, 2.0), b = random_vec(rng, d, 2.0);
    const Vec pa = project_l1_ball(ball, a), pb = project_l1_ball(ball, b);
    EXPECT_LE(pa.lpNorm<1>(), ball.radius * (1 + 1e-12));
    EXPECT_LE((project_l1_ball(ball, pa) - pa).norm(), 1e-12);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() * (1 + 1e-12));
  }
}

TEST(SoftThreshold, Examples) {
  const Vec z = vec({2, -0.5, 0.1});
  EXPECT_EQ(soft_threshold(z, 0.0), z);
  EXPECT_EQ(soft_threshold(z, 0.5), vec({1.5, 0, 0}));
  EXPECT_EQ(soft_threshold(Vec::Zero(3), 0.7), Vec::Zero(3));
  EXPECT_THROW(soft_threshold(z, -1.0), std::invalid_argument);
}

TEST(ProxSquaredNorm, Examples) {
  EXPECT_EQ(prox_squared_norm(vec({2, 4}), 0.0), vec({2, 4}));
  EXPECT_EQ(prox_squared_norm(vec({2, 4}), 0.5), vec({1, 2}));
  EXPECT_EQ(prox_squared_norm(Vec::Zero(2), 3.0), Vec::Zero(2));
}

TEST(ProxOperators, SatisfyVariationalDefinition) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = 1 + t % 8;
    const double gamma = u(rng);
    const Vec z = random_vec(rng, d, 2.0);
    auto near_z = [&](std::mt19937_64& r) -> Vec { return z + random_vec(r, d, 1.0); };

    // gamma ||.||_1  <->  soft threshold
    expect_variational([](const Vec& y) { return y.lpNorm<1>(); }, z, soft_threshold(z, gamma), gamma, near_z, rng);

    // gamma ||.||_2^2
    expect_variational([](const Vec& y) { return y.squaredNorm(); }, z, prox_squared_norm(z, gamma), gamma, near_z,
                       rng);

    // Indicators: candidates are drawn inside the set (outside ones score +inf).
    const L2Ball l2(random_vec(rng, d), u(rng));
    auto in_l2 = [&](std::mt19937_64& r) -> Vec { return project_l2_ball(l2, l2.center + random_vec(r, d, 1.0)); };
    expect_variational([&](const Vec& y) { return (y - l2.center).norm() <= l2.radius * (1 + 1e-12) ? 0.0 : kInf; },
                       z, project_l2_ball(l2, z), gamma, in_l2, rng);

    const L1Ball l1(u(rng));
    auto in_l1 = [&](std::mt19937_64& r) -> Vec { return project_l1_ball(l1, random_vec(r, d, 1.0)); };
    expect_variational([&](const Vec& y) { return y.lpNorm<1>() <= l1.radius * (1 + 1e-12) ? 0.0 : kInf; }, z,
                       project_l1_ball(l1, z), gamma, in_l1, rng);
  }
}

TEST(ProxConjugate, ZeroFunction) {
  auto identity = [](const Vec& z, double) { return z; };
  EXPECT_LE(prox_conjugate(identity, vec({1.5, -2.0}), 0.7).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ProxConjugate, L1Norm) {
  auto prox_l1 = [](const Vec& z, double t) { return soft_threshold(z, t); };
  EXPECT_EQ(prox_conjugate(prox_l1, vec({0.4}), 1.0), vec({0.4}));
  // The conjugate of ||.||_1 is the indicator of the unit l_inf ball: clipping.
  EXPECT_TRUE(prox_conjugate(prox_l1, vec({2.5, -0.2, -7.0}), 0.3).isApprox(vec({1.0, -0.2, -1.0}), 1e-14));
}

TEST(ProxConjugate, L2BallIndicatorMatchesGridSearch) {
  // f = indicator of B(0, eps) so f* = eps ||.||_2; prox_{gamma f*} minimizes
  // gamma eps ||y|| + ||y - z||^2 / 2.
  const double eps = 0.8;
  const L2Ball ball(Vec::Zero(2), eps);
  auto prox_ball = [&](const Vec& z, double) { return project_l2_ball(ball, z); };
  for (const auto& [z, gamma] : {std::pair{vec({1.0, 0.5}), 0.5}, std::pair{vec({-0.2, 0.1}), 2.0},
                                 std::pair{vec({3.0, -2.0}), 1.0}}) {
    const Vec got = prox_conjugate(prox_ball, z, gamma);
    Vec best(2);
    double best_val = kInf;
    const double h = 2e-3;
    for (double a = -4.0; a <= 4.0; a += h) {
      for (double b = -4.0; b <= 4.0; b += h) {
        const double val = gamma * eps * std::hypot(a, b) + 0.5 * ((a - z[0]) * (a - z[0]) + (b - z[1]) * (b - z[1]));
        if (val < best_val) {
          best_val = val;
          best << a, b;
        }
      }
    }
    EXPECT_LE((got - best).norm(), 4e-3);
    // Closed form: block soft threshold.
    const Vec block = z * std::max(0.0, 1.0 - gamma * eps / z.norm());
    EXPECT_LE((got - block).norm(), 1e-12);
  }
}

TEST(ProxConjugate, MoreauIdentityHoldsExactly) {
  std::mt19937_64 rng(6);
  auto prox_sq = [](const Vec& z, double t) { return prox_squared_norm(z, t); };
  for (int t = 0; t < 50; ++t) {
    const Vec z = random_vec(rng, 6, 2.0);
    const double gamma = 0.1 + t * 0.05;
    const Vec lhs = prox_conjugate(prox_sq, z, gamma) + gamma * prox_sq(Vec(z / gamma), 1.0 / gamma);
    EXPECT_LE((lhs - z).cwiseAbs().maxCoeff(), 1e-12);
  }
}
