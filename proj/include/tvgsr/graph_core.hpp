// Weighted undirected graphs, combinatorial Laplacians and the smoothness
// measures built on them.
//
// Graphs are stored as an edge list with each undirected edge kept once
// (i < j). A Laplacian is L = D - W, held as a row-major sparse matrix and
// exposed through y -> L y products plus symmetric read access.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tvgsr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Edge {
  Index i = 0;
  Index j = 0;
  double w = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

class WeightedGraph {
 public:
  WeightedGraph() = default;

  /// Edges may be given with either endpoint first; they are stored with
  /// i < j and sorted lexicographically.
  WeightedGraph(Index n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ < 0) throw std::invalid_argument("WeightedGraph: negative vertex count");
    for (auto& e : edges_) {
      if (e.i == e.j) throw std::invalid_argument("WeightedGraph: self-loop");
      if (e.i > e.j) std::swap(e.i, e.j);
      if (e.i < 0 || e.j >= n_) throw std::invalid_argument("WeightedGraph: vertex out of range");
      if (!(e.w > 0.0) || !std::isfinite(e.w))
        throw std::invalid_argument("WeightedGraph: weights must be positive and finite");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    for (std::size_t k = 1; k < edges_.size(); ++k) {
      if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j)
        throw std::invalid_argument("WeightedGraph: duplicate edge");
    }
  }

  Index n() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  friend bool operator==(const WeightedGraph&, const WeightedGraph&) = default;

 private:
  Index n_ = 0;
  std::vector<Edge> edges_;
};

class Laplacian {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  Laplacian() = default;

  explicit Laplacian(const WeightedGraph& g) : matrix_(g.n(), g.n()) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * g.edges().size());
    Vector degree = Vector::Zero(g.n());
    for (const auto& e : g.edges()) {
      trip.emplace_back(e.i, e.j, -e.w);
      trip.emplace_back(e.j, e.i, -e.w);
      degree[e.i] += e.w;
      degree[e.j] += e.w;
    }
    for (Index v = 0; v < g.n(); ++v) {
      if (degree[v] != 0.0) trip.emplace_back(v, v, degree[v]);
    }
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();
  }

  /// Accepts any dense matrix that is a valid combinatorial Laplacian.
  static Laplacian from_dense(const Matrix& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) throw std::invalid_argument("Laplacian: matrix not square");
    std::vector<Edge> edges;
    for (Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m.row(i).sum()) > tol) throw std::invalid_argument("Laplacian: row does not sum to zero");
      for (Index j = i + 1; j < m.cols(); ++j) {
        if (m(i, j) != m(j, i)) throw std::invalid_argument("Laplacian: matrix not symmetric");
        if (m(i, j) > 0.0) throw std::invalid_argument("Laplacian: positive off-diagonal entry");
        if (m(i, j) < 0.0) edges.push_back({i, j, -m(i, j)});
      }
    }
    return Laplacian(WeightedGraph(m.rows(), std::move(edges)));
  }

  Index n() const { return matrix_.rows(); }

  double operator()(Index i, Index j) const { return matrix_.coeff(i, j); }

  template <class In, class Out>
  void apply(const In& y, Out&& out) const {
    out.noalias() = matrix_ * y;
  }
  Vector apply(const Vector& y) const {
    if (y.size() != n()) throw std::invalid_argument("Laplacian::apply: dimension mismatch");
    return matrix_ * y;
  }

  const Sparse& sparse() const { return matrix_; }
  Matrix dense() const { return Matrix(matrix_); }

  /// Off-diagonal entries as an undirected edge list.
  WeightedGraph graph() const {
    std::vector<Edge> edges;
    for (Index i = 0; i < matrix_.outerSize(); ++i) {
      for (Sparse::InnerIterator it(matrix_, i); it; ++it) {
        if (it.col() > i && it.value() < 0.0) edges.push_back({i, it.col(), -it.value()});
      }
    }
    return WeightedGraph(n(), std::move(edges));
  }

  bool operator==(const Laplacian& other) const {
    return n() == other.n() && dense() == other.dense();
  }

 private:
  Sparse matrix_;
};

class DynamicGraphSequence {
 public:
  DynamicGraphSequence() = default;

  explicit DynamicGraphSequence(std::vector<Laplacian> laplacians) : laplacians_(std::move(laplacians)) {
    if (laplacians_.empty()) throw std::invalid_argument("DynamicGraphSequence: needs at least one slot");
    for (const auto& l : laplacians_) {
      if (l.n() != laplacians_.front().n())
        throw std::invalid_argument("DynamicGraphSequence: vertex counts differ across slots");
    }
  }

  static DynamicGraphSequence replicate(const Laplacian& l, Index p) {
    if (p < 1) throw std::invalid_argument("DynamicGraphSequence: needs at least one slot");
    return DynamicGraphSequence(std::vector<Laplacian>(static_cast<std::size_t>(p), l));
  }

  Index n() const { return laplacians_.front().n(); }
  Index p() const { return static_cast<Index>(laplacians_.size()); }
  const Laplacian& operator[](Index k) const { return laplacians_[static_cast<std::size_t>(k)]; }
  const std::vector<Laplacian>& laplacians() const { return laplacians_; }

 private:
  std::vector<Laplacian> laplacians_;
};

/// Symmetrized (union) k-nearest-neighbor topology. Points are the rows of
/// `points`. Equal distances are broken toward the lower vertex index.
inline WeightedGraph knn_graph(const Matrix& points, Index k) {
  const Index n = points.rows();
  if (n == 0) throw std::invalid_argument("knn_graph: no points");
  if (k < 1 || k >= n) throw std::invalid_argument("knn_graph: need 1 <= k < n");

  std::set<std::pair<Index, Index>> pairs;
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(points.row(i) - points.row(j)).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (Index r = 0; r < k; ++r) {
      const Index j = dist[static_cast<std::size_t>(r)].second;
      pairs.emplace(std::min(i, j), std::max(i, j));
    }
  }
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [i, j] : pairs) edges.push_back({i, j, 1.0});
  return WeightedGraph(n, std::move(edges));
}

/// Bandwidth of the Gaussian kernel; nullopt selects the mean edge length.
using Bandwidth = std::optional<double>;
inline constexpr Bandwidth kAutoBandwidth = std::nullopt;

/// Reweights every edge by exp(-d^2 / (2 theta^2)).
inline WeightedGraph gaussian_kernel_weights(const WeightedGraph& g, const Matrix& points, Bandwidth bandwidth) {
  if (points.rows() != g.n()) throw std::invalid_argument("gaussian_kernel_weights: point count differs from n");
  std::vector<double> d(g.edges().size());
  for (std::size_t e = 0; e < d.size(); ++e) {
    d[e] = (points.row(g.edges()[e].i) - points.row(g.edges()[e].j)).norm();
  }
  double theta = 0.0;
  if (bandwidth) {
    theta = *bandwidth;
    if (!(theta > 0.0)) throw std::invalid_argument("gaussian_kernel_weights: bandwidth must be positive");
  } else {
    if (d.empty()) throw std::invalid_argument("gaussian_kernel_weights: AUTO bandwidth on an empty edge set");
    theta = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  }
  std::vector<Edge> edges = g.edges();
  for (std::size_t e = 0; e < d.size(); ++e) {
    // theta == 0 only happens with AUTO when every edge has zero length.
    edges[e].w = theta > 0.0 ? std::exp(-d[e] * d[e] / (2.0 * theta * theta)) : 1.0;
    if (!(edges[e].w > 0.0)) edges[e].w = std::numeric_limits<double>::min();
  }
  return WeightedGraph(g.n(), std::move(edges));
}

inline Laplacian laplacian(const WeightedGraph& g) { return Laplacian(g); }

inline double quadratic_form(const Laplacian& l, const Vector& x) {
  if (x.size() != l.n()) throw std::invalid_argument("quadratic_form: dimension mismatch");
  return x.dot(l.sparse() * x);
}

/// Tr(X^T L X), the sum of column quadratic forms.
inline double trace_smoothness(const Laplacian& l, const Matrix& x) {
  if (x.rows() != l.n()) throw std::invalid_argument("trace_smoothness: row count differs from n");
  const Matrix lx = l.sparse() * x;
  return (x.array() * lx.array()).sum();
}

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kSpectralSafetyFactor = 1.01;

/// Power iteration for the largest eigenvalue of a symmetric PSD map given as
/// apply(const Vector& x, Vector& y) computing y = M x. The returned value is
/// the final Rayleigh quotient scaled by kSpectralSafetyFactor.
template <class Apply>
SpectralEstimate spectral_norm_estimate(Apply&& apply, Index dim, double tol = 1e-9, int max_iter = 10000) {
  if (dim < 1) throw std::invalid_argument("spectral_norm_estimate: dim must be positive");
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Vector x(dim);
  for (Index i = 0; i < dim; ++i) x[i] = normal(rng);
  x.normalize();

  Vector y(dim);
  SpectralEstimate out;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    apply(x, y);
    const double rq = x.dot(y);
    const double norm = y.norm();
    out.iterations = it;
    out.value = rq;
    if (norm == 0.0) {
      out.converged = true;
      break;
    }
    if (it > 1 && std::abs(rq - previous) <= tol * std::abs(rq)) {
      out.converged = true;
      break;
    }
    previous = rq;
    x = y / norm;
  }
  out.value = std::max(out.value, 0.0) * kSpectralSafetyFactor;
  return out;
}

inline SpectralEstimate spectral_norm_estimate(const Laplacian& l, double tol = 1e-9, int max_iter = 10000) {
  return spectral_norm_estimate([&](const Vector& x, Vector& y) { y.noalias() = l.sparse() * x; }, l.n(), tol,
                                max_iter);
}

/// k-NN graph over scalar signal values with Gaussian weights of the value
/// differences.
inline WeightedGraph knn_graph_from_signal(const Vector& values, Index k, Bandwidth bandwidth = kAutoBandwidth) {
  const Matrix points = values;
  return gaussian_kernel_weights(knn_graph(points, k), points, bandwidth);
}

}  // namespace tvgsr
