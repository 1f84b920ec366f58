#include "slim/analysis.hpp"
#include "slim/innersolve.hpp"
#include "slim/solvers.hpp"
#include "slim/tomo.hpp"

#include <benchmark/benchmark.h>

using namespace slim;

namespace {

// One slimLS iteration on the 1000 x 100 Gaussian problem (l = 10) for
// memory r = range(0).
void BM_SlimLSStep(benchmark::State& state) {
  TestProblem p = gaussian_testproblem(1000, 100, 100, 1);
  SolverOptions opt;
  opt.memory = static_cast<std::size_t>(state.range(0));
  SolverState st = make_state(opt, 100);
  Sampler sampler(SamplingScheme::uniform_iid, 100, 0);
  for (auto _ : state) {
    step(st, p.op->fetch_block(sampler.next_index()), opt);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(BM_SlimLSStep)->Arg(0)->Arg(2)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_SGStep(benchmark::State& state) {
  TestProblem p = gaussian_testproblem(1000, 100, 100, 1);
  SolverOptions opt;
  opt.method = Method::sg;
  opt.schedule = Schedule::constant(0.001);
  SolverState st = make_state(opt, 100);
  Sampler sampler(SamplingScheme::uniform_iid, 100, 0);
  for (auto _ : state) {
    step(st, p.op->fetch_block(sampler.next_index()), opt);
    benchmark::DoNotOptimize(st.x.data());
  }
}
BENCHMARK(BM_SGStep)->Unit(benchmark::kMicrosecond);

// LSQR against the Cholesky solve for a stack of range(0) blocks of 10 x 100.
void stacked_system(int blocks, std::vector<Matrix>& mats, Vector& r) {
  Rng rng(5);
  for (int j = 0; j < blocks; ++j) {
    Matrix a(10, 100);
    for (Eigen::Index q = 0; q < a.size(); ++q) a.data()[q] = rng.normal();
    mats.push_back(a);
  }
  r = Vector(10);
  for (Eigen::Index q = 0; q < r.size(); ++q) r(q) = rng.normal();
}

void BM_LsqrDamped(benchmark::State& state) {
  std::vector<Matrix> mats;
  Vector r;
  stacked_system(static_cast<int>(state.range(0)), mats, r);
  std::vector<const Matrix*> ptrs;
  for (const Matrix& m : mats) ptrs.push_back(&m);
  BlockStack stack(ptrs);
  for (auto _ : state) benchmark::DoNotOptimize(lsqr_damped(stack, r, 1.0, Regularizer::identity()).step.data());
}
BENCHMARK(BM_LsqrDamped)->Arg(1)->Arg(3)->Arg(9)->Unit(benchmark::kMicrosecond);

void BM_DirectStep(benchmark::State& state) {
  std::vector<Matrix> mats;
  Vector r;
  stacked_system(static_cast<int>(state.range(0)), mats, r);
  std::vector<const Matrix*> ptrs;
  for (const Matrix& m : mats) ptrs.push_back(&m);
  BlockStack stack(ptrs);
  for (auto _ : state) benchmark::DoNotOptimize(direct_step(stack, r, 1.0, Regularizer::identity()).data());
}
BENCHMARK(BM_DirectStep)->Arg(1)->Arg(3)->Arg(9)->Unit(benchmark::kMicrosecond);

void BM_TheoryConstants(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TestProblem p = gaussian_testproblem(10 * n, n, 20, 2);
  DeskModel model(*p.op);
  for (auto _ : state) benchmark::DoNotOptimize(model.constants(1.0).rho);
}
BENCHMARK(BM_TheoryConstants)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
