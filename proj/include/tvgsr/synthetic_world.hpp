// Synthetic moving-sensor world: a scalar field made of Gaussian bumps,
// sensors drifting across a square domain with per-slot k-NN graphs, and the
// outlier + noise + masking corruption model.

#pragma once

#include "tvgsr/graph_core.hpp"
#include "tvgsr/recovery.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tvgsr {

enum class FieldVariant { Smooth, PiecewiseFlat };

inline std::string_view variant_name(FieldVariant v) { return v == FieldVariant::Smooth ? "smooth" : "piecewise"; }

inline FieldVariant parse_variant(std::string_view s) {
  if (s == "smooth") return FieldVariant::Smooth;
  if (s == "piecewise" || s == "piecewise_flat" || s == "piecewise-flat") return FieldVariant::PiecewiseFlat;
  throw std::invalid_argument("unknown field variant '" + std::string(s) + "' (expected smooth or piecewise)");
}

/// Nearest of {0, 0.2, ..., 1}; halfway values round up.
inline double quantize_field(double value) { return std::clamp(std::floor(value * 5.0 + 0.5) / 5.0, 0.0, 1.0); }

struct GaussianBump {
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;
  double amplitude = 1.0;
};

/// A sum of Gaussian bumps on the unit square, affinely normalized so that
/// its range over the square is [0, 1].
class ScalarField {
 public:
  ScalarField(std::vector<GaussianBump> bumps, FieldVariant variant) : bumps_(std::move(bumps)), variant_(variant) {
    for (auto& b : bumps_) {
      Eigen::LLT<Eigen::Matrix2d> llt(b.covariance);
      if (llt.info() != Eigen::Success || b.covariance(0, 1) != b.covariance(1, 0))
        throw std::invalid_argument("ScalarField: covariance must be symmetric positive definite");
      if (!(b.amplitude > 0.0)) throw std::invalid_argument("ScalarField: amplitude must be positive");
      precision_.push_back(b.covariance.inverse());
    }
    // Range over a fine grid including the corners and edges.
    constexpr int kGrid = 401;
    lo_ = std::numeric_limits<double>::infinity();
    hi_ = -lo_;
    for (int a = 0; a < kGrid; ++a) {
      for (int c = 0; c < kGrid; ++c) {
        const double r = raw(a / double(kGrid - 1), c / double(kGrid - 1));
        lo_ = std::min(lo_, r);
        hi_ = std::max(hi_, r);
      }
    }
  }

  const std::vector<GaussianBump>& bumps() const { return bumps_; }
  FieldVariant variant() const { return variant_; }

  /// Field value at unit-square coordinates (x, y), in [0, 1].
  double operator()(double x, double y) const {
    double v = hi_ > lo_ ? (raw(x, y) - lo_) / (hi_ - lo_) : 0.0;
    v = std::clamp(v, 0.0, 1.0);
    return variant_ == FieldVariant::PiecewiseFlat ? quantize_field(v) : v;
  }

 private:
  double raw(double x, double y) const {
    double total = 0.0;
    for (std::size_t b = 0; b < bumps_.size(); ++b) {
      const Eigen::Vector2d d = Eigen::Vector2d(x, y) - bumps_[b].mean;
      total += bumps_[b].amplitude * std::exp(-0.5 * d.dot(precision_[b] * d));
    }
    return total;
  }

  std::vector<GaussianBump> bumps_;
  std::vector<Eigen::Matrix2d> precision_;
  FieldVariant variant_;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/// 3 to 6 bumps with means in the unit square, random orientation and
/// per-axis standard deviations in [0.1, 0.2].
inline ScalarField make_field(FieldVariant variant, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(3, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.1, 0.2);
  std::uniform_real_distribution<double> amp(0.5, 1.5);

  std::vector<GaussianBump> bumps(static_cast<std::size_t>(count(rng)));
  for (auto& b : bumps) {
    b.mean = {unit(rng), unit(rng)};
    const double angle = unit(rng) * std::numbers::pi;
    const double s1 = spread(rng);
    const double s2 = spread(rng);
    Eigen::Matrix2d rot;
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    Eigen::Matrix2d cov = rot * Eigen::Vector2d(s1 * s1, s2 * s2).asDiagonal() * rot.transpose();
    cov(1, 0) = cov(0, 1);
    b.covariance = cov;
    b.amplitude = amp(rng);
  }
  return ScalarField(std::move(bumps), variant);
}

struct SensorTrajectory {
  Index n = 0;
  Index p = 0;
  double v = 0.0;
  double side = 1.0;
  /// positions[k] is the n x 2 coordinate matrix at slot k, inside [0, side]^2.
  std::vector<Matrix> positions;
};

struct WorldOptions {
  Index k = 4;
  /// Side length of the square the sensors move in; velocity is measured in
  /// the same units. The field is stretched over the whole square. With a
  /// side of 8, speeds 0.25 to 1 move a sensor 1/32 to 1/8 of the square per
  /// slot, which keeps consecutive slots correlated.
  double side = 8.0;
};

struct SyntheticDataset {
  TimeVaryingSignal truth;
  DynamicGraphSequence graphs;
  SensorTrajectory trajectory;
};

namespace detail {

inline double reflect(double x, double side) {
  const double period = 2.0 * side;
  x = std::fmod(x, period);
  if (x < 0.0) x += period;
  return x > side ? period - x : x;
}

}  // namespace detail

inline DynamicGraphSequence graphs_from_positions(const std::vector<Matrix>& positions, Index k) {
  std::vector<Laplacian> ls;
  ls.reserve(positions.size());
  for (const auto& pos : positions) ls.emplace_back(gaussian_kernel_weights(knn_graph(pos, k), pos, kAutoBandwidth));
  return DynamicGraphSequence(std::move(ls));
}

/// Sensors start uniformly in the square and each slot move distance v in an
/// independent uniformly random direction, reflecting off the walls.
inline SyntheticDataset simulate(Index n, Index p, double v, const ScalarField& field, std::uint64_t seed,
                                 const WorldOptions& options = {}) {
  if (n <= options.k) throw std::invalid_argument("simulate: need more sensors than k-NN neighbors");
  if (p < 1) throw std::invalid_argument("simulate: need at least one time slot");
  if (!(v >= 0.0)) throw std::invalid_argument("simulate: velocity must be nonnegative");
  if (!(options.side > 0.0)) throw std::invalid_argument("simulate: domain side must be positive");

  const double side = options.side;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SensorTrajectory traj{n, p, v, side, {}};
  traj.positions.reserve(static_cast<std::size_t>(p));
  Matrix pos(n, 2);
  for (Index i = 0; i < n; ++i) pos.row(i) << side * unit(rng), side * unit(rng);
  traj.positions.push_back(pos);
  for (Index k = 1; k < p; ++k) {
    for (Index i = 0; i < n; ++i) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      pos(i, 0) = detail::reflect(pos(i, 0) + v * std::cos(angle), side);
      pos(i, 1) = detail::reflect(pos(i, 1) + v * std::sin(angle), side);
    }
    traj.positions.push_back(pos);
  }

  Matrix truth(n, p);
  for (Index k = 0; k < p; ++k) {
    const Matrix& at = traj.positions[static_cast<std::size_t>(k)];
    for (Index i = 0; i < n; ++i) truth(i, k) = field(at(i, 0) / side, at(i, 1) / side);
  }
  auto graphs = graphs_from_positions(traj.positions, options.k);
  return {TimeVaryingSignal(std::move(truth)), std::move(graphs), std::move(traj)};
}

struct CorruptionParams {
  double sigma = 0.0;
  double ps = 0.0;
  double pp = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("CorruptionParams: sigma must be >= 0");
    if (!(ps >= 0.0 && ps < 1.0) || !(pp >= 0.0 && pp < 1.0))
      throw std::invalid_argument("CorruptionParams: probabilities must lie in [0, 1)");
  }
};

struct CorruptedData {
  Observation obs;
  Matrix outliers;
  Mask mask;
};

/// X = Phi(truth + S + N): outliers uniform on [-1, 1] with probability ps,
/// Gaussian noise of std sigma, entries dropped with probability pp.
inline CorruptedData corrupt(const TimeVaryingSignal& truth, const CorruptionParams& params) {
  params.validate();
  const Index n = truth.n();
  const Index p = truth.p();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> impulse(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix outliers = Matrix::Zero(n, p);
  Matrix raw = truth.values();
  Mask mask(n, p);
  for (Index k = 0; k < p; ++k) {
    for (Index i = 0; i < n; ++i) {
      // Fixed draw order per entry so each corruption stream is reproducible.
      const bool hit = unit(rng) < params.ps;
      const double amplitude = impulse(rng);
      const double noise = gauss(rng);
      const bool dropped = unit(rng) < params.pp;
      if (hit) outliers(i, k) = amplitude;
      raw(i, k) += outliers(i, k) + params.sigma * noise;
      mask(i, k) = !dropped;
    }
  }
  auto obs = Observation::masked(std::move(raw), mask, CorruptionLevels{params.sigma, params.ps, params.pp});
  return {std::move(obs), std::move(outliers), std::move(mask)};
}

}  // namespace tvgsr
