// Robust recovery of a time-varying graph signal from an observation with
// missing entries, sparse outliers and Gaussian noise:
//
//     min_{Y,S}  f1(Y) + lambda R(Delta Y)
//     s.t.       ||X - Phi(Y + S)||_F <= eps,   ||S||_1 <= eta
//
// where f1 is one of the vertex-domain (or joint) quadratic smoothness
// terms, R is ||.||_1 or ||.||_F^2 on the temporal difference Delta Y, and
// Phi keeps observed entries. The ten method variants A..J select which
// terms are active.

#pragma once

#include "tvgsr/graph_core.hpp"
#include "tvgsr/pds_solver.hpp"
#include "tvgsr/prox_ops.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tvgsr {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class TimeVaryingSignal {
 public:
  TimeVaryingSignal() = default;
  explicit TimeVaryingSignal(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) throw std::invalid_argument("TimeVaryingSignal: empty matrix");
    if (!values_.allFinite()) throw std::invalid_argument("TimeVaryingSignal: non-finite entry");
  }

  Index n() const { return values_.rows(); }
  Index p() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

/// Noise levels an observation was generated with, used for automatic radii.
struct CorruptionLevels {
  double sigma = 0.0;
  double ps = 0.0;
  double pp = 0.0;
};

class Observation {
 public:
  Observation() = default;

  /// Requires unobserved entries of `data` to be exactly zero.
  Observation(Matrix data, Mask mask, std::optional<CorruptionLevels> levels = std::nullopt)
      : data_(std::move(data)), mask_(std::move(mask)), levels_(levels) {
    if (data_.rows() != mask_.rows() || data_.cols() != mask_.cols())
      throw std::invalid_argument("Observation: mask dimensions differ from data");
    if (data_.size() == 0) throw std::invalid_argument("Observation: empty data");
    for (Index j = 0; j < data_.cols(); ++j) {
      for (Index i = 0; i < data_.rows(); ++i) {
        if (!mask_(i, j) && data_(i, j) != 0.0)
          throw std::invalid_argument("Observation: unobserved entries must be stored as 0");
        if (!std::isfinite(data_(i, j))) throw std::invalid_argument("Observation: non-finite entry");
      }
    }
  }

  /// Zeroes the unobserved entries of `raw`.
  static Observation masked(Matrix raw, Mask mask, std::optional<CorruptionLevels> levels = std::nullopt) {
    if (raw.rows() != mask.rows() || raw.cols() != mask.cols())
      throw std::invalid_argument("Observation: mask dimensions differ from data");
    raw = mask.select(raw, 0.0);
    return Observation(std::move(raw), std::move(mask), levels);
  }

  static Observation fully_observed(Matrix data, std::optional<CorruptionLevels> levels = std::nullopt) {
    Mask mask = Mask::Constant(data.rows(), data.cols(), true);
    return Observation(std::move(data), std::move(mask), levels);
  }

  Index n() const { return data_.rows(); }
  Index p() const { return data_.cols(); }
  const Matrix& data() const { return data_; }
  const Mask& mask() const { return mask_; }
  const std::optional<CorruptionLevels>& levels() const { return levels_; }

 private:
  Matrix data_;
  Mask mask_;
  std::optional<CorruptionLevels> levels_;
};

enum class MethodId { A, B, C, D, E, F, G, H, I, J };
enum class VertexTerm { None, StaticTrace, DynamicSum };
enum class TemporalTerm { None, L1Diff, FroDiff };
enum class JointTerm { None, StaticJoint, DynamicJoint };

inline constexpr MethodId kAllMethods[] = {MethodId::A, MethodId::B, MethodId::C, MethodId::D, MethodId::E,
                                           MethodId::F, MethodId::G, MethodId::H, MethodId::I, MethodId::J};

inline char method_letter(MethodId id) { return static_cast<char>('A' + static_cast<int>(id)); }

inline MethodId parse_method(std::string_view s) {
  if (s.size() == 1) {
    const char c = static_cast<char>(s[0] >= 'a' && s[0] <= 'z' ? s[0] - 'a' + 'A' : s[0]);
    if (c >= 'A' && c <= 'J') return static_cast<MethodId>(c - 'A');
  }
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected one letter A-J)");
}

struct MethodSpec {
  MethodId id = MethodId::J;
  VertexTerm vertex = VertexTerm::None;
  TemporalTerm temporal = TemporalTerm::None;
  JointTerm joint = JointTerm::None;
  double lambda = 1.0;

  /// Regularizer selection for each method. Methods with a single objective
  /// term (A..F) keep lambda = 1 since scaling it cannot move the minimizer.
  static MethodSpec of(MethodId id, double lambda = 1.0) {
    MethodSpec m;
    m.id = id;
    switch (id) {
      case MethodId::A: m.temporal = TemporalTerm::L1Diff; break;
      case MethodId::B: m.temporal = TemporalTerm::FroDiff; break;
      case MethodId::C: m.vertex = VertexTerm::StaticTrace; break;
      case MethodId::D: m.vertex = VertexTerm::DynamicSum; break;
      case MethodId::E: m.joint = JointTerm::StaticJoint; break;
      case MethodId::F: m.joint = JointTerm::DynamicJoint; break;
      case MethodId::G: m.vertex = VertexTerm::StaticTrace; m.temporal = TemporalTerm::L1Diff; break;
      case MethodId::H: m.vertex = VertexTerm::DynamicSum; m.temporal = TemporalTerm::L1Diff; break;
      case MethodId::I: m.vertex = VertexTerm::StaticTrace; m.temporal = TemporalTerm::FroDiff; break;
      case MethodId::J: m.vertex = VertexTerm::DynamicSum; m.temporal = TemporalTerm::FroDiff; break;
    }
    if (m.uses_lambda()) {
      if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("MethodSpec: lambda must be >= 0");
      m.lambda = lambda;
    }
    return m;
  }

  bool uses_lambda() const { return vertex != VertexTerm::None && temporal != TemporalTerm::None; }
  bool needs_time_differences() const { return temporal != TemporalTerm::None || joint != JointTerm::None; }
  bool has_quadratic() const { return vertex != VertexTerm::None || joint != JointTerm::None; }
};

/// Column k of the result is y_{k+1} - y_k.
inline Matrix temporal_difference(const Matrix& y) {
  if (y.cols() < 2) throw std::invalid_argument("temporal_difference: need at least two time slots");
  return y.rightCols(y.cols() - 1) - y.leftCols(y.cols() - 1);
}

/// Adjoint of temporal_difference, mapping n x (p-1) back to n x p.
inline Matrix temporal_difference_adjoint(const Matrix& z) {
  const Index p = z.cols() + 1;
  Matrix out(z.rows(), p);
  out.col(0) = -z.col(0);
  for (Index k = 1; k + 1 < p; ++k) out.col(k) = z.col(k - 1) - z.col(k);
  out.col(p - 1) = z.col(p - 2);
  return out;
}

struct Radii {
  double eps = 0.0;
  double eta = 0.0;
};

/// eps = 0.9 sigma sqrt(n p (1-Ps)(1-Pp)),  eta = (Ps / 2) n p.
inline Radii auto_radii(Index n, Index p, double sigma, double ps, double pp) {
  if (!(sigma >= 0.0) || !(ps >= 0.0 && ps < 1.0) || !(pp >= 0.0 && pp < 1.0))
    throw std::invalid_argument("auto_radii: need sigma >= 0 and probabilities in [0, 1)");
  const double np = static_cast<double>(n) * static_cast<double>(p);
  return {0.9 * sigma * std::sqrt(np * (1.0 - ps) * (1.0 - pp)), ps / 2.0 * np};
}

namespace detail {

inline void check_graphs(Index n, Index p, const DynamicGraphSequence& graphs, const MethodSpec& method) {
  if (graphs.n() != n) throw std::invalid_argument("recovery: graph vertex count differs from signal rows");
  if (graphs.p() != p) throw std::invalid_argument("recovery: graph slot count differs from signal columns");
  if (method.needs_time_differences() && p < 2)
    throw std::invalid_argument(std::string("recovery: method ") + method_letter(method.id) +
                                " needs at least two time slots");
}

}  // namespace detail

/// The differentiable part f1 of a method and its gradient. Static variants
/// use the first Laplacian for every slot.
class SmoothTerm {
 public:
  SmoothTerm(MethodSpec method, const DynamicGraphSequence& graphs) : method_(method), graphs_(&graphs) {}

  bool is_zero() const { return !method_.has_quadratic(); }

  double value(const Matrix& y) const {
    const auto& g = *graphs_;
    switch (method_.vertex) {
      case VertexTerm::StaticTrace: return trace_smoothness(g[0], y);
      case VertexTerm::DynamicSum: {
        double total = 0.0;
        for (Index k = 0; k < y.cols(); ++k) total += y.col(k).dot(g[k].sparse() * y.col(k));
        return total;
      }
      case VertexTerm::None: break;
    }
    switch (method_.joint) {
      case JointTerm::StaticJoint: return trace_smoothness(g[0], temporal_difference(y));
      case JointTerm::DynamicJoint: {
        const Matrix dy = temporal_difference(y);
        double total = 0.0;
        for (Index k = 0; k < dy.cols(); ++k) total += dy.col(k).dot(g[k].sparse() * dy.col(k));
        return total;
      }
      case JointTerm::None: break;
    }
    return 0.0;
  }

  /// Writes grad f1(Y) into `grad` (n x p, column-major storage).
  template <class In, class Out>
  void gradient(const In& y, Out& grad) const {
    const auto& g = *graphs_;
    const Index p = y.cols();
    switch (method_.vertex) {
      case VertexTerm::StaticTrace: grad.noalias() = 2.0 * (g[0].sparse() * y); return;
      case VertexTerm::DynamicSum:
        for (Index k = 0; k < p; ++k) grad.col(k).noalias() = 2.0 * (g[k].sparse() * y.col(k));
        return;
      case VertexTerm::None: break;
    }
    switch (method_.joint) {
      case JointTerm::StaticJoint: {
        const Matrix ldy = 2.0 * (g[0].sparse() * temporal_difference(y));
        grad = temporal_difference_adjoint(ldy);
        return;
      }
      case JointTerm::DynamicJoint: {
        Matrix dy = temporal_difference(y);
        for (Index k = 0; k + 1 < p; ++k) dy.col(k) = 2.0 * (g[k].sparse() * Vector(dy.col(k)));
        grad = temporal_difference_adjoint(dy);
        return;
      }
      case JointTerm::None: break;
    }
    grad.setZero();
  }

  Matrix gradient(const Matrix& y) const {
    Matrix grad(y.rows(), y.cols());
    gradient(y, grad);
    return grad;
  }

 private:
  MethodSpec method_;
  const DynamicGraphSequence* graphs_;
};

/// f1(Y) + lambda R(Delta Y) for the given method.
inline double objective(const MethodSpec& method, const DynamicGraphSequence& graphs, const Matrix& y) {
  double total = SmoothTerm(method, graphs).value(y);
  if (method.temporal == TemporalTerm::L1Diff) total += method.lambda * temporal_difference(y).lpNorm<1>();
  if (method.temporal == TemporalTerm::FroDiff) total += method.lambda * temporal_difference(y).squaredNorm();
  return total;
}

struct RecoverOptions {
  int max_iter = 20000;
  double tol = 1e-4;
  double gamma2 = 1.0;
  /// For l1 temporal terms raise gamma2 to at least 12 lambda. The dual
  /// block then lives in a box of radius lambda and converges much faster.
  bool auto_gamma2 = false;
  /// Use ||D||^2 + 2 <= 6 for lambda1(A^T A) instead of power iteration.
  bool analytic_norm_bound = false;
  bool record_trace = true;
};

struct BuiltProblem {
  PdsProblem problem;
  PdsConfig config;
  double norm_AtA = 0.0;
  Radii radii;
  Index n = 0;
  Index p = 0;
};

/// Assembles u = [vec Y; vec S], A = [[D, 0], [Phi, Phi]] (the D row only
/// when a temporal regularizer is active) and the prox/gradient oracles.
/// The returned problem references `graphs`, which must outlive it.
inline BuiltProblem build_problem(const Observation& obs, const DynamicGraphSequence& graphs, const MethodSpec& method,
                                  Radii radii, const RecoverOptions& options = {}) {
  const Index n = obs.n();
  const Index p = obs.p();
  detail::check_graphs(n, p, graphs, method);
  if (!(radii.eps >= 0.0) || !(radii.eta >= 0.0)) throw std::invalid_argument("build_problem: radii must be >= 0");

  const Index np = n * p;
  const bool temporal = method.temporal != TemporalTerm::None;
  const Index diff_size = temporal ? n * (p - 1) : 0;

  BuiltProblem out;
  out.radii = radii;
  out.n = n;
  out.p = p;
  PdsProblem& prob = out.problem;

  auto mask = std::make_shared<const Vector>(
      Eigen::Map<const Eigen::Array<bool, Eigen::Dynamic, 1>>(obs.mask().data(), np).cast<double>().matrix());
  const Vector x_vec = Eigen::Map<const Vector>(obs.data().data(), np);

  prob.A.input_dim = 2 * np;
  prob.A.output_dim = diff_size + np;
  prob.A.forward = [n, p, np, diff_size, mask](const Vector& u, Vector& out) {
    out.resize(diff_size + np);
    if (diff_size > 0) {
      Eigen::Map<const Matrix> y(u.data(), n, p);
      Eigen::Map<Matrix> d(out.data(), n, p - 1);
      d.noalias() = y.rightCols(p - 1) - y.leftCols(p - 1);
    }
    out.tail(np) = mask->cwiseProduct(u.head(np) + u.tail(np));
  };
  prob.A.adjoint = [n, p, np, diff_size, mask](const Vector& v, Vector& out) {
    out.resize(2 * np);
    const Vector masked = mask->cwiseProduct(v.tail(np));
    out.tail(np) = masked;
    if (diff_size > 0) {
      Eigen::Map<const Matrix> z(v.data(), n, p - 1);
      Eigen::Map<Matrix> y(out.data(), n, p);
      y.col(0) = -z.col(0);
      for (Index k = 1; k + 1 < p; ++k) y.col(k) = z.col(k - 1) - z.col(k);
      y.col(p - 1) = z.col(p - 2);
      out.head(np) += masked;
    } else {
      out.head(np) = masked;
    }
  };

  const SmoothTerm smooth(method, graphs);
  if (!smooth.is_zero()) {
    prob.grad_f1 = [smooth, n, p, np](const Vector& u, Vector& grad) {
      grad.resize(2 * np);
      Eigen::Map<const Matrix> y(u.data(), n, p);
      Eigen::Map<Matrix> g(grad.data(), n, p);
      smooth.gradient(y, g);
      grad.tail(np).setZero();
    };
  }

  const L1Ball l1(radii.eta);
  prob.prox_f2 = [l1, np](const Vector& z, double) {
    Vector out = z;
    out.tail(np) = project_l1_ball(l1, z.tail(np));
    return out;
  };

  if (temporal) {
    const double lambda = method.lambda;
    ProxFn reg;
    if (method.temporal == TemporalTerm::L1Diff) {
      reg = [lambda](const Vector& z, double t) { return soft_threshold(z, lambda * t); };
    } else {
      reg = [lambda](const Vector& z, double t) { return prox_squared_norm(z, lambda * t); };
    }
    prob.dual_blocks.push_back({diff_size, std::move(reg)});
  }
  auto ball = std::make_shared<const L2Ball>(x_vec, radii.eps);
  prob.dual_blocks.push_back({np, [ball](const Vector& z, double) { return project_l2_ball(*ball, z); }});

  prob.u0 = Vector::Zero(2 * np);
  prob.u0.head(np) = x_vec;
  prob.v0 = Vector::Zero(diff_size + np);
  prob.primal_blocks = {np, np};

  double beta = 0.0;
  if (method.vertex == VertexTerm::StaticTrace) {
    beta = 2.0 * spectral_norm_estimate(graphs[0]).value;
  } else if (method.vertex == VertexTerm::DynamicSum) {
    for (const auto& l : graphs.laplacians()) beta = std::max(beta, 2.0 * spectral_norm_estimate(l).value);
  } else if (method.joint != JointTerm::None) {
    beta = spectral_norm_estimate(
               [&](const Vector& x, Vector& y) {
                 Eigen::Map<const Matrix> xm(x.data(), n, p);
                 Eigen::Map<Matrix> ym(y.data(), n, p);
                 smooth.gradient(xm, ym);
               },
               np)
               .value;
  }

  out.norm_AtA = options.analytic_norm_bound ? (temporal ? 4.0 : 0.0) + 2.0
                                             : spectral_norm_estimate(
                                                   [&](const Vector& x, Vector& y) {
                                                     Vector tmp;
                                                     prob.A.forward(x, tmp);
                                                     prob.A.adjoint(tmp, y);
                                                   },
                                                   2 * np, 1e-7)
                                                   .value;
  double gamma2 = options.gamma2;
  if (options.auto_gamma2 && method.temporal == TemporalTerm::L1Diff) gamma2 = std::max(gamma2, 12.0 * method.lambda);
  out.config = default_steps(beta, out.norm_AtA, gamma2);
  out.config.max_iter = options.max_iter;
  out.config.tol = options.tol;
  out.config.record_trace = options.record_trace;
  return out;
}

/// Automatic radii are used for whichever of eps / eta is left unset.
struct RadiiRequest {
  std::optional<double> eps;
  std::optional<double> eta;
};

struct RecoveryResult {
  TimeVaryingSignal Y;
  Matrix S;
  SolveTrace trace;
  double eps = 0.0;
  double eta = 0.0;
  /// ||X - Phi(Y + S)||_F of the returned iterate.
  double fidelity_residual = 0.0;
  /// Distance the observed part of Y was moved to land inside the fidelity
  /// ball after the last iteration.
  double feasibility_correction = 0.0;
  bool converged = false;
  bool constraints_satisfied = false;
};

inline double fidelity_residual(const Observation& obs, const Matrix& y, const Matrix& s) {
  return obs.mask().select(obs.data() - (y + s), 0.0).norm();
}

inline Radii resolve_radii(const Observation& obs, const RadiiRequest& request) {
  Radii r;
  if (!request.eps || !request.eta) {
    if (!obs.levels())
      throw std::invalid_argument("recover: automatic radii need the observation's corruption levels");
    r = auto_radii(obs.n(), obs.p(), obs.levels()->sigma, obs.levels()->ps, obs.levels()->pp);
  }
  if (request.eps) r.eps = *request.eps;
  if (request.eta) r.eta = *request.eta;
  return r;
}

inline RecoveryResult recover(const Observation& obs, const DynamicGraphSequence& graphs, const MethodSpec& method,
                              const RadiiRequest& radii = {}, const RecoverOptions& options = {}) {
  const BuiltProblem built = build_problem(obs, graphs, method, resolve_radii(obs, radii), options);
  PdsSolution sol = solve(built.problem, built.config);

  const Index n = built.n;
  const Index p = built.p;
  const Index np = n * p;
  Matrix y = Eigen::Map<const Matrix>(sol.u.data(), n, p);
  Matrix s = Eigen::Map<const Matrix>(sol.u.data() + np, n, p);

  RecoveryResult out;
  out.eps = built.radii.eps;
  out.eta = built.radii.eta;
  out.converged = sol.trace.converged;
  out.trace = std::move(sol.trace);

  // The iterates approach the fidelity ball only asymptotically; move the
  // observed entries of Y onto its surface when they end up outside.
  const Matrix residual = obs.mask().select((y + s) - obs.data(), 0.0);
  const double dist = residual.norm();
  if (dist > out.eps) {
    const Matrix shift = residual * (out.eps / dist) - residual;
    y += shift;
    out.feasibility_correction = shift.norm();
  }
  out.fidelity_residual = fidelity_residual(obs, y, s);
  constexpr double kSlack = 1e-9;
  out.constraints_satisfied = out.fidelity_residual <= out.eps * (1.0 + 1e-6) + kSlack &&
                              s.lpNorm<1>() <= out.eta * (1.0 + 1e-6) + kSlack;
  out.Y = TimeVaryingSignal(std::move(y));
  out.S = std::move(s);
  return out;
}

}  // namespace tvgsr
