// Serial reference kernels against their OpenMP counterparts.
#include "gflow/kernels.hpp"
#include "gflow/network.hpp"

#include <benchmark/benchmark.h>

namespace {

using gflow::kernels::Exec;

struct Fixture {
  gflow::Network net;
  gflow::ParamVector theta;
  gflow::Dataset data;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    auto data = gflow::gen_synthetic(50, 20, 5, 1.0, 1.0, 7);
    auto net = gflow::Network::build(gflow::dense_chain({20, 40, 40, 5}), gflow::builtin("leaky_relu"));
    auto theta = gflow::init_params(net, 1);
    return Fixture{std::move(net), std::move(theta), std::move(data)};
  }();
  return f;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_Jacobian(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(gflow::kernels::stacked_jacobian(f.net, f.theta, f.data, exec_of(state)));
}

void BM_Gram(benchmark::State& state) {
  const auto& f = fixture();
  const auto j = gflow::kernels::stacked_jacobian(f.net, f.theta, f.data, Exec::serial);
  for (auto _ : state) benchmark::DoNotOptimize(gflow::kernels::gram(j, exec_of(state)));
}

void BM_LossGradient(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(gflow::kernels::loss_gradient(f.net, f.theta, f.data, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_Jacobian)->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_Gram)->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(BM_LossGradient)->ArgName("parallel")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
