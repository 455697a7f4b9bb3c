#include <benchmark/benchmark.h>

#include "scflow/eval.hpp"
#include "scflow/flowcore.hpp"
#include "scflow/flownet.hpp"

using namespace scflow;

namespace {

net::NetParams trained_like_net() {
  net::NetArch arch;
  auto p = net::init_velocity_net(arch, 1);
  Rng rng(7);
  std::normal_distribution<double> n(0.0, 0.01);
  for (auto& v : p.layers.back().weight.reshaped()) v = n(rng);
  return p;
}

Eigen::MatrixXd random_rows(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (auto& v : x.reshaped()) v = n(rng);
  return x;
}

void BM_NetForward(benchmark::State& state) {
  const auto p = trained_like_net();
  const auto x = random_rows(static_cast<int>(state.range(0)), p.arch.state_dim(), 1);
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(x.rows(), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(net::net_velocity(p, x, t));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_NetForward)->Arg(1)->Arg(256);

void BM_NetForwardBackward(benchmark::State& state) {
  const auto p = trained_like_net();
  const auto x = random_rows(static_cast<int>(state.range(0)), p.arch.state_dim(), 2);
  const Eigen::VectorXd t = Eigen::VectorXd::Constant(x.rows(), 0.6);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(x.rows(), x.cols());
  for (auto _ : state) {
    auto fr = net::net_forward(p, x, t);
    benchmark::DoNotOptimize(net::net_backward(p, fr.cache, up));
  }
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_NetForwardBackward)->Arg(256);

void BM_OdeSolve(benchmark::State& state) {
  const auto p = trained_like_net();
  const auto x = random_rows(64, p.arch.state_dim(), 3);
  flow::SolverConfig cfg{flow::Direction::kReverse, static_cast<int>(state.range(0)), flow::Method::kEuler};
  for (auto _ : state) benchmark::DoNotOptimize(flow::ode_solve(p, x, cfg));
}
BENCHMARK(BM_OdeSolve)->Arg(1)->Arg(16)->Arg(64);

void BM_KMeans(benchmark::State& state) {
  const auto x = random_rows(static_cast<int>(state.range(0)), 64, 4);
  eval::KMeansOptions opts;
  opts.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(eval::kmeans(x, 12, opts));
}
BENCHMARK(BM_KMeans)->Arg(1536);

}  // namespace
BENCHMARK_MAIN();
