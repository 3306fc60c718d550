#include "pdflow/benchmark_problem.hpp"
#include "pdflow/certificates.hpp"
#include "pdflow/dynamics.hpp"

#include <benchmark/benchmark.h>

using namespace pdflow;

namespace {

struct Fixture {
  Problem p = benchmark_problem();
  SpectralData sd = spectral_data(benchmark_graph());
  Gains g{5, 1, 0.5};
  State s0 = random_initial_state(p, 1);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

// Ring of n agents with chords, scalar decisions; for scaling of the rhs.
Problem ring_problem(int n) {
  Problem p;
  p.m = 4;
  for (int i = 0; i < n; ++i) {
    LocalCost c;
    c.H = Eigen::MatrixXd::Identity(4, 4) * (1.0 + i % 3);
    c.c = Eigen::VectorXd::Constant(4, 0.1 * (i % 5));
    p.costs.push_back(c);
  }
  return p;
}

Digraph ring_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    edges.push_back({i, (i + 1) % n, 1.0});
    edges.push_back({i, (i + 7) % n, 0.5});
  }
  return Digraph::from_edges(n, edges);
}

}  // namespace

static void BM_VectorField(benchmark::State& st) {
  const auto& f = fx();
  const FlowModel model(f.p, f.sd, f.g);
  const Eigen::VectorXd eta = f.s0.packed();
  Eigen::VectorXd d;
  for (auto _ : st) {
    model.rhs(eta, d);
    benchmark::DoNotOptimize(d.data());
  }
}
BENCHMARK(BM_VectorField);

static void BM_VectorFieldRing(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const Problem p = ring_problem(n);
  const SpectralData sd = spectral_data(ring_graph(n));
  const FlowModel model(p, sd, {5, 1, 0.5});
  const Eigen::VectorXd eta = Eigen::VectorXd::LinSpaced(2 * n * 4, -1, 1);
  Eigen::VectorXd d;
  for (auto _ : st) {
    model.rhs(eta, d);
    benchmark::DoNotOptimize(d.data());
  }
  st.SetComplexityN(n);
}
BENCHMARK(BM_VectorFieldRing)->RangeMultiplier(4)->Range(16, 256)->Complexity();

static void BM_Rk4Second(benchmark::State& st) {
  const auto& f = fx();
  IntegratorConfig ic;
  ic.T = 1.0;
  ic.record_stride = 1000;
  for (auto _ : st) benchmark::DoNotOptimize(integrate(f.p, f.sd, f.g, f.s0, ic).steps);
}
BENCHMARK(BM_Rk4Second)->Unit(benchmark::kMillisecond);

static void BM_SdirkStep(benchmark::State& st) {
  const auto& f = fx();
  const FlowModel model(f.p, f.sd, f.g);
  const Eigen::VectorXd eta = f.s0.packed();
  Eigen::VectorXd next;
  for (auto _ : st) {
    benchmark::DoNotOptimize(model.sdirk_step(eta, 1e-2, next));
  }
}
BENCHMARK(BM_SdirkStep);

static void BM_SpectralData(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const Digraph g = ring_graph(n);
  for (auto _ : st) benchmark::DoNotOptimize(spectral_data(g).rho);
}
BENCHMARK(BM_SpectralData)->Arg(5)->Arg(32)->Arg(128);

static void BM_SectorCheck(benchmark::State& st) {
  const auto& f = fx();
  const Constants k = certify_constants(f.p);
  const Eigen::VectorXd xs = Eigen::VectorXd::Zero(20);
  for (auto _ : st) {
    benchmark::DoNotOptimize(check_sector(f.p, f.sd, xs, k, 1000, 7, 1).min_slack_sector);
  }
}
BENCHMARK(BM_SectorCheck)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
