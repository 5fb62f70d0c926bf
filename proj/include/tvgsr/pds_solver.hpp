// Primal-dual splitting for
//
//     min_u  f1(u) + f2(u) + f3(A u)
//
// with f1 differentiable (beta-Lipschitz gradient), f2 and f3 proximable and
// A a linear operator. Each iteration performs
//
//     u+ = prox_{g1 f2}[u - g1 (grad f1(u) + A^T v)]
//     v+ = prox_{g2 f3*}[v + g2 A (2 u+ - u)]
//
// with the conjugate prox evaluated through the Moreau decomposition. f3 is
// separable over consecutive dual blocks.

#pragma once

#include "tvgsr/graph_core.hpp"
#include "tvgsr/prox_ops.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvgsr {

/// (z, t) -> prox_{t f}(z).
using ProxFn = std::function<Vector(const Vector&, double)>;
using GradFn = std::function<void(const Vector& u, Vector& grad)>;

struct LinearOperator {
  Index input_dim = 0;
  Index output_dim = 0;
  std::function<void(const Vector& u, Vector& out)> forward;
  std::function<void(const Vector& v, Vector& out)> adjoint;

  Vector apply(const Vector& u) const {
    Vector out(output_dim);
    forward(u, out);
    return out;
  }
  Vector apply_adjoint(const Vector& v) const {
    Vector out(input_dim);
    adjoint(v, out);
    return out;
  }

  static LinearOperator identity(Index dim) {
    return {dim, dim, [](const Vector& u, Vector& out) { out = u; },
            [](const Vector& v, Vector& out) { out = v; }};
  }

  static LinearOperator from_matrix(Matrix m) {
    auto shared = std::make_shared<const Matrix>(std::move(m));
    return {shared->cols(), shared->rows(), [shared](const Vector& u, Vector& out) { out.noalias() = *shared * u; },
            [shared](const Vector& v, Vector& out) { out.noalias() = shared->transpose() * v; }};
  }
};

/// Largest relative violation of <A u, v> = <u, A^T v> over random pairs.
inline double adjoint_mismatch(const LinearOperator& a, int trials = 5, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector u(a.input_dim), v(a.output_dim);
    for (auto& x : u) x = normal(rng);
    for (auto& x : v) x = normal(rng);
    const double lhs = a.apply(u).dot(v);
    const double rhs = u.dot(a.apply_adjoint(v));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  return worst;
}

/// lambda_max(A^T A) by power iteration.
inline SpectralEstimate operator_norm_squared(const LinearOperator& a) {
  Vector tmp(a.output_dim);
  return spectral_norm_estimate(
      [&](const Vector& x, Vector& y) {
        a.forward(x, tmp);
        a.adjoint(tmp, y);
      },
      a.input_dim);
}

struct DualBlock {
  Index size = 0;
  /// prox of this block's f3 term; empty means f3 = 0 on the block.
  ProxFn prox;
};

struct PdsProblem {
  GradFn grad_f1;  // empty: f1 = 0
  ProxFn prox_f2;  // empty: f2 = 0
  std::vector<DualBlock> dual_blocks;
  LinearOperator A;
  Vector u0;
  Vector v0;
  /// Sizes of the primal sub-blocks checked separately by the stopping rule;
  /// empty means the whole primal vector is one block.
  std::vector<Index> primal_blocks;

  void validate() const {
    if (u0.size() != A.input_dim) throw std::invalid_argument("PdsProblem: u0 does not match A's input dimension");
    if (v0.size() != A.output_dim) throw std::invalid_argument("PdsProblem: v0 does not match A's output dimension");
    Index dual = 0;
    for (const auto& b : dual_blocks) dual += b.size;
    if (dual != A.output_dim) throw std::invalid_argument("PdsProblem: dual blocks do not cover A's output");
    Index primal = 0;
    for (Index s : primal_blocks) primal += s;
    if (!primal_blocks.empty() && primal != u0.size())
      throw std::invalid_argument("PdsProblem: primal blocks do not cover u");
  }
};

struct PdsConfig {
  double gamma1 = 0.0;
  double gamma2 = 1.0;
  int max_iter = 20000;
  double tol = 1e-4;
  double beta = 0.0;
  bool record_trace = true;

  /// Throws unless 1/gamma1 - gamma2 * norm_AtA >= beta / 2.
  void validate(double norm_AtA) const {
    if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw std::invalid_argument("PdsConfig: step sizes must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("PdsConfig: beta must be nonnegative");
    if (max_iter < 1) throw std::invalid_argument("PdsConfig: max_iter must be positive");
    if (!(tol >= 0.0)) throw std::invalid_argument("PdsConfig: tol must be nonnegative");
    if (1.0 / gamma1 - gamma2 * norm_AtA < beta / 2.0)
      throw std::invalid_argument("PdsConfig: step sizes violate 1/gamma1 - gamma2*lambda1(A^T A) >= beta/2");
  }

  void validate(const LinearOperator& a) const { validate(operator_norm_squared(a).value); }
};

inline PdsConfig default_steps(double beta, double norm_AtA, double gamma2 = 1.0) {
  if (!(beta >= 0.0) || !(norm_AtA >= 0.0) || !(gamma2 > 0.0))
    throw std::invalid_argument("default_steps: need beta >= 0, norm >= 0, gamma2 > 0");
  PdsConfig cfg;
  cfg.beta = beta;
  cfg.gamma2 = gamma2;
  cfg.gamma1 = 1.0 / (beta / 2.0 + gamma2 * norm_AtA + 1e-6);
  cfg.validate(norm_AtA);
  return cfg;
}

struct SolveTrace {
  std::vector<double> primal_change;
  std::vector<double> dual_change;
  int iterations = 0;
  double wall_ms = 0.0;
  bool converged = false;
};

struct PdsSolution {
  Vector u;
  Vector v;
  SolveTrace trace;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, SolveTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

/// Runs the iteration until every primal block change and the dual change
/// are at most config.tol, or config.max_iter is reached. Throws
/// DivergenceError on non-finite iterates.
inline PdsSolution solve(const PdsProblem& problem, const PdsConfig& config) {
  problem.validate();
  const auto start = std::chrono::steady_clock::now();
  const Index n = problem.u0.size();
  const Index m = problem.v0.size();

  std::vector<Index> blocks = problem.primal_blocks;
  if (blocks.empty()) blocks.push_back(n);

  PdsSolution out{problem.u0, problem.v0, {}};
  Vector& u = out.u;
  Vector& v = out.v;
  Vector grad = Vector::Zero(n);
  Vector atv(n), u_next(n), extrap(n), av(m), v_next(m);

  const double g1 = config.gamma1;
  const double g2 = config.gamma2;

  auto finish = [&] {
    out.trace.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  for (int it = 0; it < config.max_iter; ++it) {
    if (problem.grad_f1) problem.grad_f1(u, grad);
    problem.A.adjoint(v, atv);
    u_next = u - g1 * (grad + atv);
    if (problem.prox_f2) u_next = problem.prox_f2(u_next, g1);

    extrap = 2.0 * u_next - u;
    problem.A.forward(extrap, av);
    v_next = v + g2 * av;
    Index offset = 0;
    for (const auto& b : problem.dual_blocks) {
      auto seg = v_next.segment(offset, b.size);
      if (b.prox) {
        seg = prox_conjugate(b.prox, Vector(seg), g2);
      } else {
        // f3 = 0 on this block: its conjugate is the indicator of {0}.
        seg.setZero();
      }
      offset += b.size;
    }

    double worst_primal = 0.0;
    double primal_total = 0.0;
    offset = 0;
    for (Index size : blocks) {
      const double c = (u_next.segment(offset, size) - u.segment(offset, size)).norm();
      worst_primal = std::max(worst_primal, c);
      primal_total += c * c;
      offset += size;
    }
    const double dual = (v_next - v).norm();
    u.swap(u_next);
    v.swap(v_next);
    ++out.trace.iterations;
    if (config.record_trace) {
      out.trace.primal_change.push_back(std::sqrt(primal_total));
      out.trace.dual_change.push_back(dual);
    }
    if (!std::isfinite(primal_total) || !std::isfinite(dual)) {
      finish();
      throw DivergenceError("pds solve: non-finite iterate at iteration " + std::to_string(it + 1), out.trace);
    }
    if (worst_primal <= config.tol && dual <= config.tol) {
      out.trace.converged = true;
      break;
    }
  }
  finish();
  return out;
}

}  // namespace tvgsr
