#include "oracles.hpp"
#include "regression_constants.hpp"

#include "pdflow/benchmark_problem.hpp"
#include "pdflow/digraph.hpp"
#include "pdflow/error.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pdflow;

namespace {

Digraph two_node() {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, 1, 0;
  return Digraph(A);
}

Digraph three_cycle_weighted() {
  // a_13 = 2, a_21 = 1, a_32 = 1
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A(0, 2) = 2;
  A(1, 0) = 1;
  A(2, 1) = 1;
  return Digraph(A);
}

// Random strongly connected digraph: a Hamiltonian cycle plus random chords.
Digraph random_strong(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> w(0.2, 3.0);
  std::bernoulli_distribution chord(0.3);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) A((i + 1) % n, i) = w(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && A(i, j) == 0.0 && chord(rng)) A(i, j) = w(rng);
  return Digraph(A);
}

}  // namespace

TEST(Digraph, RejectsMalformedAdjacency) {
  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(2, 2);
  neg(0, 1) = -1;
  EXPECT_THROW(Digraph{neg}, ValidationError);
  Eigen::MatrixXd loop = Eigen::MatrixXd::Zero(2, 2);
  loop(1, 1) = 1;
  EXPECT_THROW(Digraph{loop}, ValidationError);
  EXPECT_THROW(Digraph{Eigen::MatrixXd::Zero(1, 1)}, ValidationError);
  EXPECT_THROW(Digraph{Eigen::MatrixXd::Zero(2, 3)}, ValidationError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Zero(2, 2);
  nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Digraph{nan}, ValidationError);
}

TEST(Laplacian, TwoNodeBidirectional) {
  Eigen::Matrix2d expected;
  expected << 1, -1, -1, 1;
  EXPECT_TRUE(laplacian(two_node()).isApprox(Eigen::MatrixXd(expected)));
}

TEST(Laplacian, WeightedThreeCycle) {
  Eigen::Matrix3d expected;
  expected << 2, 0, -2, -1, 1, 0, 0, -1, 1;
  EXPECT_EQ((laplacian(three_cycle_weighted()) - Eigen::MatrixXd(expected)).norm(), 0.0);
}

TEST(Laplacian, NoEdgesGivesZero) {
  EXPECT_EQ(laplacian(Digraph(Eigen::MatrixXd::Zero(3, 3))).norm(), 0.0);
}

TEST(StronglyConnected, Examples) {
  Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(3, 3);
  cyc(1, 0) = cyc(2, 1) = cyc(0, 2) = 1;
  EXPECT_TRUE(strongly_connected(Digraph(cyc)));
  const Edge e[] = {{0, 1, 1.0}};
  EXPECT_FALSE(strongly_connected(Digraph::from_edges(2, e)));
  EXPECT_TRUE(strongly_connected(benchmark_graph()));
  EXPECT_TRUE(oracle::strongly_connected_closure(benchmark_graph().adjacency()));
}

TEST(StronglyConnected, AgreesWithClosureOracleOnRandomGraphs) {
  std::mt19937 rng(11);
  std::bernoulli_distribution edge(0.25);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 6;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && edge(rng)) A(i, j) = 1.0;
    EXPECT_EQ(strongly_connected(Digraph(A)), oracle::strongly_connected_closure(A)) << A;
  }
}

TEST(LeftEigenvector, BalancedAndSymmetricGiveUniform) {
  EXPECT_TRUE(left_eigenvector(laplacian(two_node())).isApprox(Eigen::Vector2d(0.5, 0.5), 1e-12));
  Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) cyc((i + 1) % 4, i) = 2.0;  // balanced directed cycle
  const Digraph g(cyc);
  ASSERT_TRUE(g.weight_balanced());
  EXPECT_LE((left_eigenvector(laplacian(g)) - Eigen::VectorXd::Constant(4, 0.25)).lpNorm<Eigen::Infinity>(),
            1e-12);
}

TEST(LeftEigenvector, WeightedThreeCycle) {
  const Eigen::VectorXd r = left_eigenvector(laplacian(three_cycle_weighted()));
  EXPECT_NEAR(r(0), 0.2, 1e-12);
  EXPECT_NEAR(r(1), 0.4, 1e-12);
  EXPECT_NEAR(r(2), 0.4, 1e-12);
}

TEST(LeftEigenvector, RankErrorWhenNullSpaceIsNotOneDimensional) {
  EXPECT_THROW(left_eigenvector(Eigen::MatrixXd::Zero(3, 3)), RankError);
  // Two disjoint 2-node components.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
  A(0, 1) = A(1, 0) = A(2, 3) = A(3, 2) = 1;
  EXPECT_THROW(left_eigenvector(laplacian(Digraph(A))), RankError);
}

TEST(SpectralData, RejectsNotStronglyConnected) {
  const Edge e[] = {{0, 1, 1.0}};
  EXPECT_THROW(spectral_data(Digraph::from_edges(2, e)), ValidationError);
}

TEST(GeneralizedConnectivity, TwoNodeIsTwo) {
  const SpectralData sd = spectral_data(two_node());
  EXPECT_NEAR(sd.rho, 2.0, 1e-12);
}

TEST(GeneralizedConnectivity, BenchmarkRegressionAndSamplingCrossCheck) {
  const SpectralData sd = spectral_data(benchmark_graph());
  EXPECT_NEAR(sd.rho, frozen::kRho, 1e-12);
  EXPECT_NEAR(sd.rmin, frozen::kRmin, 1e-12);
  const double sampled = oracle::rayleigh_sampled_rho(sd.L, sd.r, 1'000'000, 3);
  EXPECT_GE(sampled, sd.rho - 1e-9);
  EXPECT_LE(sampled - sd.rho, 1e-3);
}

TEST(GeneralizedConnectivity, HomogeneousInScale) {
  const Digraph g = benchmark_graph();
  const double rho = spectral_data(g).rho;
  for (double s : {0.5, 2.0, 4.0}) {
    EXPECT_NEAR(spectral_data(scale(g, s)).rho, s * rho, 1e-10 * s * rho) << s;
  }
}

TEST(Scale, Examples) {
  const Digraph g = benchmark_graph();
  EXPECT_EQ((scale(g, 1.0).adjacency() - g.adjacency()).norm(), 0.0);
  EXPECT_EQ((scale(g, 4.0).adjacency() - benchmark_graph(4.0).adjacency()).norm(), 0.0);
  EXPECT_LE((spectral_data(scale(g, 2.0)).r - spectral_data(g).r).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_THROW(scale(g, 0.0), ValidationError);
  EXPECT_THROW(scale(g, -1.0), ValidationError);
}

TEST(SpectralData, InvariantsOnRandomStronglyConnectedGraphs) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 9;
    const Digraph g = random_strong(n, rng);
    const SpectralData sd = spectral_data(g);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double scale_L = 1.0 + sd.L.cwiseAbs().maxCoeff();
    EXPECT_LE((sd.L * ones).lpNorm<Eigen::Infinity>(), 1e-12 * scale_L);
    EXPECT_LE((sd.r.transpose() * sd.L).lpNorm<Eigen::Infinity>(), 1e-12 * scale_L);
    EXPECT_NEAR(sd.r.sum(), 1.0, 1e-12);
    EXPECT_GT(sd.r.minCoeff(), 0.0);
    EXPECT_LE((sd.r - oracle::left_null_vector(sd.L)).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LE((sd.Ltilde - sd.Ltilde.transpose()).norm(), 1e-12 * scale_L);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sd.Ltilde, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues()(0), -1e-12 * scale_L);
    EXPECT_GT(sd.rho, 0.0);
    EXPECT_GE(oracle::rayleigh_descent_rho(sd.L, sd.r, 3, trial), sd.rho - 1e-9);
    EXPECT_NEAR(spectral_data(scale(g, 2.0)).rho, 2.0 * sd.rho, 1e-10 * sd.rho);
  }
}

TEST(SpectralData, RayleighLowerBoundOnUnitSamples) {
  const SpectralData sd = spectral_data(benchmark_graph());
  const Eigen::MatrixXd R = sd.R();
  std::mt19937 rng(2);
  std::normal_distribution<double> nd;
  for (int s = 0; s < 10000; ++s) {
    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x(i) = nd(rng);
    x -= (sd.r.dot(x) / sd.r.squaredNorm()) * sd.r;
    x.normalize();
    EXPECT_GE(x.dot(sd.Ltilde * x), 2.0 * sd.rho * x.dot(R * x) - 1e-9);
  }
}

TEST(SpectralData, RhoMatchesDescentOracleOnBenchmark) {
  const SpectralData sd = spectral_data(benchmark_graph());
  EXPECT_NEAR(oracle::rayleigh_descent_rho(sd.L, sd.r, 10, 1), sd.rho, 1e-8);
}

TEST(OrthogonalComplement, IsOrthonormalAndOrthogonalToR) {
  const Eigen::VectorXd r = spectral_data(benchmark_graph()).r;
  const Eigen::MatrixXd B = orthogonal_complement_basis(r);
  ASSERT_EQ(B.cols(), 4);
  EXPECT_LE((B.transpose() * B - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-14);
  EXPECT_LE((r.transpose() * B).norm(), 1e-15);
}

TEST(Benchmark, GraphIsUnbalanced) {
  const Digraph g = benchmark_graph();
  EXPECT_FALSE(g.weight_balanced());
  EXPECT_FALSE(benchmark_graph(4.0).weight_balanced());
}

TEST(StackedLaplacian, MatchesKronecker) {
  const SpectralData sd = spectral_data(benchmark_graph());
  const StackedLaplacian lap(sd.L, 4);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(20, 20);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) K.block(i * 4, j * 4, 4, 4) = sd.L(i, j) * Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LE((lap.dense() - K).norm(), 1e-15);
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(20);
  for (int i = 0; i < 20; ++i) x(i) = nd(rng);
  EXPECT_LE((lap.apply(x) - K * x).norm(), 1e-13);
}
