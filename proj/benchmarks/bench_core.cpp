#include "spare/datagen.hpp"
#include "spare/kmeans.hpp"
#include "spare/linear_proxy.hpp"
#include "spare/model.hpp"
#include "spare/sampling.hpp"

#include <benchmark/benchmark.h>

using namespace spare;

namespace {

datagen::Dataset reference(std::size_t d, std::size_t per_major) {
  datagen::NoiseLevels s;
  s.core = {{-1, 0.1}, {1, 0.1}};
  s.spurious = {{-1, 0.1}, {1, 0.1}};
  s.ambient = 1.0;
  const auto bank = datagen::build_feature_bank(d, {{-1, 1.0}, {1, 1.0}}, {{-1, 2.0}, {1, 2.0}}, s);
  const std::vector<datagen::GroupSpec> g{{1, 1, per_major, true}, {1, -1, per_major / 19, false},
                                          {-1, -1, per_major, true}, {-1, 1, per_major / 19, false}};
  return datagen::generate_synthetic(bank, g, 0);
}

void BM_Forward(benchmark::State& state) {
  const auto data = reference(100, 950);
  const auto net = model::init_symmetric(static_cast<std::size_t>(state.range(0)), 100, 1, model::Activation::relu(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_batch(data.x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Forward)->Arg(512)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
  const auto data = reference(100, 950);
  auto net = model::init_symmetric(static_cast<std::size_t>(state.range(0)), 100, 1, model::Activation::relu(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_gradient(net, model::Loss::l2, data.x, data.labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Gradient)->Arg(512)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_MinibatchGradientCmnistShape(benchmark::State& state) {
  Matrix x = Matrix::Random(32, 2352);
  std::vector<int> y(32);
  for (int i = 0; i < 32; ++i) y[i] = i % 5;
  const auto net = model::init_symmetric(512, 2352, 5, model::Activation::relu(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_gradient(net, model::Loss::cross_entropy, x, y));
}
BENCHMARK(BM_MinibatchGradientCmnistShape)->Unit(benchmark::kMicrosecond);

void BM_KMeans(benchmark::State& state) {
  const Matrix x = Matrix::Random(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(cluster::kmeans(x, 3, 1));
}
BENCHMARK(BM_KMeans)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Silhouette(benchmark::State& state) {
  const Matrix x = Matrix::Random(state.range(0), 5);
  std::vector<int> a(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<int>(i % 3);
  for (auto _ : state) benchmark::DoNotOptimize(cluster::silhouette(x, a));
}
BENCHMARK(BM_Silhouette)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ChooseK(benchmark::State& state) {
  const Matrix x = Matrix::Random(2000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(cluster::choose_k(x, 2, 5, 0));
}
BENCHMARK(BM_ChooseK)->Unit(benchmark::kMillisecond);

void BM_PsiClosedForm(benchmark::State& state) {
  const auto data = reference(static_cast<std::size_t>(state.range(0)), 950);
  const auto k = linear::activation_constants(model::Activation::relu(), linear::covariance_trace_term(data.x));
  for (auto _ : state) {
    const Matrix p = linear::psi_matrix(data.x, k);
    benchmark::DoNotOptimize(linear::linear_closed_form(p, data.labels, true));
  }
}
BENCHMARK(BM_PsiClosedForm)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_PlanSampler(benchmark::State& state) {
  const auto plan = sampling::uniform_plan(50000);
  sampling::PlanSampler s(plan, 32, 0);
  for (auto _ : state) benchmark::DoNotOptimize(s.next());
}
BENCHMARK(BM_PlanSampler);

}  // namespace
BENCHMARK_MAIN();
