#include "tvgsr/recovery.hpp"
#include "tvgsr/synthetic_world.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tvgsr;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index n, Index p) {
  std::normal_distribution<double> normal;
  Matrix m(n, p);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

DynamicGraphSequence random_graphs(std::mt19937_64& rng, Index n, Index p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Laplacian> ls;
  for (Index k = 0; k < p; ++k) {
    Matrix pos(n, 2);
    for (Index i = 0; i < pos.size(); ++i) pos.data()[i] = unit(rng);
    ls.emplace_back(gaussian_kernel_weights(knn_graph(pos, 2), pos, kAutoBandwidth));
  }
  return DynamicGraphSequence(std::move(ls));
}

struct Instance {
  SyntheticDataset world;
  CorruptedData data;
};

Instance small_instance(std::uint64_t seed, double sigma, double ps, double pp) {
  Instance inst{simulate(16, 20, 0.1, make_field(FieldVariant::Smooth, 1), seed), {}};
  inst.data = corrupt(inst.world.truth, {sigma, ps, pp, seed + 100});
  return inst;
}

RecoverOptions tight_options() {
  RecoverOptions o;
  o.tol = 1e-6;
  o.max_iter = 100000;
  return o;
}

}  // namespace

TEST(TemporalDifference, Examples) {
  Matrix y(2, 3);
  y << 1, 3, 6,
       0, 0, -2;
  Matrix expected(2, 2);
  expected << 2, 3,
              0, -2;
  EXPECT_EQ(temporal_difference(y), expected);
  EXPECT_EQ(temporal_difference(Matrix::Constant(4, 5, 2.5)), Matrix::Zero(4, 4));
  EXPECT_THROW(temporal_difference(Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST(TemporalDifference, AdjointIdentity) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Index n = 1 + t % 4, p = 2 + t % 6;
    const Matrix y = random_matrix(rng, n, p), z = random_matrix(rng, n, p - 1);
    const double lhs = (temporal_difference(y).array() * z.array()).sum();
    const double rhs = (y.array() * temporal_difference_adjoint(z).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST(AutoRadii, Formula) {
  const Radii r = auto_radii(64, 100, 0.05, 0.05, 0.05);
  EXPECT_NEAR(r.eps, 0.9 * 0.05 * std::sqrt(6400 * 0.95 * 0.95), 1e-12);
  EXPECT_NEAR(r.eps, 3.42, 1e-12);
  EXPECT_DOUBLE_EQ(r.eta, 160.0);
  const Radii zero = auto_radii(3, 3, 0.0, 0.0, 0.0);
  EXPECT_EQ(zero.eps, 0.0);
  EXPECT_EQ(zero.eta, 0.0);
  EXPECT_THROW(auto_radii(3, 3, -1.0, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(auto_radii(3, 3, 0.0, 1.0, 0.0), std::invalid_argument);
}

TEST(MethodSpec, Table) {
  struct Row {
    char letter;
    VertexTerm vertex;
    TemporalTerm temporal;
    JointTerm joint;
  };
  const Row rows[] = {
      {'A', VertexTerm::None, TemporalTerm::L1Diff, JointTerm::None},
      {'B', VertexTerm::None, TemporalTerm::FroDiff, JointTerm::None},
      {'C', VertexTerm::StaticTrace, TemporalTerm::None, JointTerm::None},
      {'D', VertexTerm::DynamicSum, TemporalTerm::None, JointTerm::None},
      {'E', VertexTerm::None, TemporalTerm::None, JointTerm::StaticJoint},
      {'F', VertexTerm::None, TemporalTerm::None, JointTerm::DynamicJoint},
      {'G', VertexTerm::StaticTrace, TemporalTerm::L1Diff, JointTerm::None},
      {'H', VertexTerm::DynamicSum, TemporalTerm::L1Diff, JointTerm::None},
      {'I', VertexTerm::StaticTrace, TemporalTerm::FroDiff, JointTerm::None},
      {'J', VertexTerm::DynamicSum, TemporalTerm::FroDiff, JointTerm::None},
  };
  for (const auto& row : rows) {
    const auto m = MethodSpec::of(parse_method(std::string(1, row.letter)), 0.5);
    EXPECT_EQ(method_letter(m.id), row.letter);
    EXPECT_EQ(m.vertex, row.vertex) << row.letter;
    EXPECT_EQ(m.temporal, row.temporal) << row.letter;
    EXPECT_EQ(m.joint, row.joint) << row.letter;
    EXPECT_EQ(m.lambda, m.uses_lambda() ? 0.5 : 1.0) << row.letter;
  }
  EXPECT_EQ(parse_method("j"), MethodId::J);
  EXPECT_THROW(parse_method("K"), std::invalid_argument);
  EXPECT_THROW(parse_method("AB"), std::invalid_argument);
  EXPECT_THROW(MethodSpec::of(MethodId::J, -1.0), std::invalid_argument);
}

TEST(Observation, Invariants) {
  Mask mask(1, 2);
  mask << true, false;
  Matrix data(1, 2);
  data << 1.0, 2.0;
  EXPECT_THROW(Observation(data, mask), std::invalid_argument);
  const auto obs = Observation::masked(data, mask);
  EXPECT_EQ(obs.data()(0, 1), 0.0);
  EXPECT_THROW(Observation(Matrix::Zero(2, 2), mask), std::invalid_argument);
  EXPECT_THROW(TimeVaryingSignal(Matrix(0, 3)), std::invalid_argument);
  EXPECT_FALSE(Observation::fully_observed(data).levels().has_value());
}

TEST(SmoothTerm, DynamicGradientOnSingleEdge) {
  // L = [[1,-1],[-1,1]], y = [1,0] -> 2 L y = [2,-2]; two slots summed per column.
  const auto l = laplacian(WeightedGraph(2, {{0, 1, 1.0}}));
  const auto graphs = DynamicGraphSequence::replicate(l, 1);
  Matrix y(2, 1);
  y << 1.0, 0.0;
  Matrix expected(2, 1);
  expected << 2.0, -2.0;
  EXPECT_EQ(SmoothTerm(MethodSpec::of(MethodId::D), graphs).gradient(y), expected);

  const auto l2 = laplacian(WeightedGraph(2, {{0, 1, 2.0}}));
  Matrix y2(2, 1);
  y2 << 2.0, 1.0;
  Matrix expected2(2, 1);
  expected2 << 4.0, -4.0;
  EXPECT_EQ(SmoothTerm(MethodSpec::of(MethodId::D), DynamicGraphSequence({l2})).gradient(y2), expected2);
}

TEST(SmoothTerm, MethodWithoutQuadraticHasZeroGradient) {
  std::mt19937_64 rng(2);
  const auto graphs = random_graphs(rng, 5, 4);
  for (auto id : {MethodId::A, MethodId::B}) {
    const SmoothTerm term(MethodSpec::of(id), graphs);
    EXPECT_TRUE(term.is_zero());
    EXPECT_EQ(term.gradient(random_matrix(rng, 5, 4)), Matrix::Zero(5, 4));
  }
}

TEST(SmoothTerm, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (auto id : {MethodId::C, MethodId::D, MethodId::E, MethodId::F}) {
    for (int t = 0; t < 5; ++t) {
      const auto graphs = random_graphs(rng, 5, 4);
      const SmoothTerm term(MethodSpec::of(id), graphs);
      const Matrix y = random_matrix(rng, 5, 4);
      const Matrix grad = term.gradient(y);
      Matrix fd(5, 4);
      for (Index i = 0; i < y.size(); ++i) {
        Matrix plus = y, minus = y;
        plus.data()[i] += h;
        minus.data()[i] -= h;
        fd.data()[i] = (term.value(plus) - term.value(minus)) / (2.0 * h);
      }
      EXPECT_LT((grad - fd).norm() / grad.norm(), 1e-5) << method_letter(id);
    }
  }
}

TEST(Recover, MethodNeedsTwoSlots) {
  const auto graphs = DynamicGraphSequence::replicate(laplacian(WeightedGraph(2, {{0, 1, 1.0}})), 1);
  const auto obs = Observation::fully_observed(Matrix::Ones(2, 1));
  for (auto id : kAllMethods) {
    const auto m = MethodSpec::of(id);
    if (m.needs_time_differences()) {
      EXPECT_THROW(recover(obs, graphs, m, {0.0, 0.0}), std::invalid_argument) << method_letter(id);
    } else {
      EXPECT_NO_THROW(recover(obs, graphs, m, {0.0, 0.0})) << method_letter(id);
    }
  }
}

TEST(Recover, RejectsMismatchedGraphsAndMissingLevels) {
  std::mt19937_64 rng(4);
  const auto graphs = random_graphs(rng, 5, 4);
  const auto obs = Observation::fully_observed(Matrix::Zero(5, 3));
  EXPECT_THROW(recover(obs, graphs, MethodSpec::of(MethodId::J), {0.0, 0.0}), std::invalid_argument);
  const auto obs4 = Observation::fully_observed(Matrix::Zero(5, 4));
  EXPECT_THROW(recover(obs4, graphs, MethodSpec::of(MethodId::J)), std::invalid_argument);
}

TEST(Recover, ZeroRadiiPinObservedEntries) {
  const auto inst = small_instance(5, 0.0, 0.0, 0.0);
  for (auto id : kAllMethods) {
    const auto r = recover(inst.data.obs, inst.world.graphs, MethodSpec::of(id, 1.0));
    EXPECT_EQ(r.eps, 0.0);
    EXPECT_EQ(r.eta, 0.0);
    EXPECT_TRUE(r.constraints_satisfied);
    EXPECT_LE((r.Y.values() - inst.world.truth.values()).cwiseAbs().maxCoeff(), 1e-9) << method_letter(id);
  }
}

TEST(Recover, ConstraintsHoldAndObjectiveDoesNotExceedObservation) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto inst = small_instance(seed, 0.1, 0.1, 0.1);
    const Matrix& x = inst.data.obs.data();
    for (auto id : kAllMethods) {
      const auto m = MethodSpec::of(id, 0.5);
      const auto r = recover(inst.data.obs, inst.world.graphs, m);
      EXPECT_TRUE(r.constraints_satisfied) << method_letter(id);
      EXPECT_LE(r.fidelity_residual, r.eps * (1 + 1e-6) + 1e-9);
      EXPECT_LE(r.S.lpNorm<1>(), r.eta * (1 + 1e-6) + 1e-9);
      // (Y, S) = (X, 0) is feasible, so the minimizer cannot be worse.
      const double f_x = objective(m, inst.world.graphs, x);
      EXPECT_LE(objective(m, inst.world.graphs, r.Y.values()), f_x * (1 + 1e-3) + 1e-9) << method_letter(id);
    }
  }
}

TEST(Recover, StaticAndDynamicCoincideOnStaticGraphs) {
  const auto inst = small_instance(7, 0.1, 0.1, 0.1);
  const auto graphs = DynamicGraphSequence::replicate(inst.world.graphs[0], 20);
  const std::pair<MethodId, MethodId> pairs[] = {
      {MethodId::C, MethodId::D}, {MethodId::E, MethodId::F}, {MethodId::G, MethodId::H}, {MethodId::I, MethodId::J}};
  for (const auto& [s, d] : pairs) {
    const auto a = recover(inst.data.obs, graphs, MethodSpec::of(s, 0.7));
    const auto b = recover(inst.data.obs, graphs, MethodSpec::of(d, 0.7));
    EXPECT_LE((a.Y.values() - b.Y.values()).norm(), 1e-9) << method_letter(s) << method_letter(d);
  }
}

TEST(Recover, ZeroLambdaReducesToVertexTerm) {
  const auto inst = small_instance(8, 0.1, 0.1, 0.1);
  const auto dm = MethodSpec::of(MethodId::D);
  const auto d = recover(inst.data.obs, inst.world.graphs, dm, {}, tight_options());
  const double f_d = objective(dm, inst.world.graphs, d.Y.values());
  for (auto id : {MethodId::H, MethodId::J}) {
    const auto r = recover(inst.data.obs, inst.world.graphs, MethodSpec::of(id, 0.0), {}, tight_options());
    EXPECT_NEAR(objective(dm, inst.world.graphs, r.Y.values()), f_d, 1e-3 * f_d) << method_letter(id);
  }
}

TEST(Recover, SeparatesOutliers) {
  const auto inst = small_instance(9, 0.0, 0.1, 0.0);
  const Matrix& planted = inst.data.outliers;
  const auto r = recover(inst.data.obs, inst.world.graphs, MethodSpec::of(MethodId::J, 1.0));
  int hits = 0, total = 0;
  for (Index i = 0; i < planted.size(); ++i) {
    if (planted.data()[i] == 0.0) continue;
    ++total;
    if (std::abs(r.S.data()[i]) > 1e-6) ++hits;
  }
  ASSERT_GT(total, 0);
  EXPECT_GE(static_cast<double>(hits) / total, 0.8) << hits << "/" << total;
}

TEST(Recover, Deterministic) {
  const auto inst = small_instance(10, 0.1, 0.1, 0.1);
  const auto m = MethodSpec::of(MethodId::J, 1.0);
  const auto a = recover(inst.data.obs, inst.world.graphs, m);
  const auto b = recover(inst.data.obs, inst.world.graphs, m);
  EXPECT_EQ(a.Y.values(), b.Y.values());
  EXPECT_EQ(a.S, b.S);
  EXPECT_EQ(a.trace.iterations, b.trace.iterations);
}

TEST(BuildProblem, StepsSatisfyConvergenceCondition) {
  const auto inst = small_instance(11, 0.1, 0.1, 0.1);
  for (auto id : kAllMethods) {
    const auto built = build_problem(inst.data.obs, inst.world.graphs, MethodSpec::of(id), {1.0, 1.0});
    EXPECT_NO_THROW(built.problem.validate());
    EXPECT_NO_THROW(built.config.validate(built.norm_AtA));
    EXPECT_LT(adjoint_mismatch(built.problem.A), 1e-9);
    // Power iteration overestimates by the safety factor, and ||A||^2 <= ||D||^2 + 2 <= 6.
    EXPECT_LE(built.norm_AtA, 6.0 * kSpectralSafetyFactor + 1e-6);
  }
}
