// Closed-form proximity operators and metric projections.
//
// Everything acts on flat vectors; matrices are passed in column-major
// vectorized form.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace tvgsr {

using ProxVector = Eigen::VectorXd;

struct L2Ball {
  ProxVector center;
  double radius = 0.0;

  L2Ball(ProxVector c, double eps) : center(std::move(c)), radius(eps) {
    if (!(radius >= 0.0)) throw std::invalid_argument("L2Ball: radius must be nonnegative");
  }
};

struct L1Ball {
  double radius = 0.0;

  explicit L1Ball(double eta) : radius(eta) {
    if (!(radius >= 0.0)) throw std::invalid_argument("L1Ball: radius must be nonnegative");
  }
};

inline ProxVector project_l2_ball(const L2Ball& ball, const ProxVector& z) {
  if (z.size() != ball.center.size()) throw std::invalid_argument("project_l2_ball: dimension mismatch");
  const ProxVector diff = z - ball.center;
  const double dist = diff.norm();
  if (dist <= ball.radius) return z;
  return ball.center + (ball.radius / dist) * diff;
}

/// Euclidean projection onto {x : ||x||_1 <= radius}. The shrinkage level s
/// solves sum_j max(0, |z_j| - s) = radius and is found by sorting |z|.
inline ProxVector project_l1_ball(const L1Ball& ball, const ProxVector& z) {
  const double eta = ball.radius;
  if (eta == 0.0) return ProxVector::Zero(z.size());
  if (z.lpNorm<1>() <= eta) return z;

  std::vector<double> mag(static_cast<std::size_t>(z.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) mag[static_cast<std::size_t>(j)] = std::abs(z[j]);
  std::sort(mag.begin(), mag.end(), std::greater<>());

  double cumsum = 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < mag.size(); ++r) {
    cumsum += mag[r];
    const double candidate = (cumsum - eta) / static_cast<double>(r + 1);
    if (r + 1 == mag.size() || mag[r + 1] <= candidate) {
      s = candidate;
      break;
    }
  }
  ProxVector out(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double shrunk = std::max(0.0, std::abs(z[j]) - s);
    out[j] = std::copysign(shrunk, z[j]);
  }
  return out;
}

inline ProxVector soft_threshold(const ProxVector& z, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("soft_threshold: threshold must be nonnegative");
  return z.unaryExpr([gamma](double x) { return std::copysign(std::max(0.0, std::abs(x) - gamma), x); });
}

/// prox of gamma * ||.||_2^2.
inline ProxVector prox_squared_norm(const ProxVector& z, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("prox_squared_norm: index must be nonnegative");
  return z / (2.0 * gamma + 1.0);
}

/// Moreau decomposition: prox_{gamma f*}(z) = z - gamma prox_{f/gamma}(z/gamma),
/// where prox_f(x, t) evaluates prox_{t f}(x).
template <class ProxF>
ProxVector prox_conjugate(ProxF&& prox_f, const ProxVector& z, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_conjugate: gamma must be positive");
  return z - gamma * prox_f(ProxVector(z / gamma), 1.0 / gamma);
}

}  // namespace tvgsr
