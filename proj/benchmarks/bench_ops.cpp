// Microbenchmarks for the kernels that dominate training time.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "ocda/curriculum/curriculum.hpp"
#include "ocda/harness/analysis.hpp"
#include "ocda/models/bundle.hpp"
#include "ocda/numerics/nn.hpp"
#include "ocda/numerics/random.hpp"

using namespace ocda;
using numerics::Graph;
using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor(Shape{n, n}, 1), b = random_tensor(Shape{n, n}, 2);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(numerics::matmul(g.constant(a), g.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// First LeNet block on a batch of 32x32x3 images, forward and backward.
void BM_Conv2dStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor(Shape{batch, 32, 32, 3}, 3, 0.0f, 1.0f);
  const Tensor w = random_tensor(Shape{5, 5, 3, 6}, 4);
  for (auto _ : state) {
    Graph g;
    Var wv = g.param(w);
    Var y = numerics::mean(numerics::max_pool2d(numerics::relu(numerics::conv2d(g.constant(x), wv, 1, 2)), 2));
    benchmark::DoNotOptimize(numerics::gradients(g, y, {wv}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Conv2dStep)->Arg(32)->Arg(64);

// Class encoder plus classifier, cross-entropy and the full parameter
// gradient: one stage-1 step without the optimizer.
void BM_EncoderStep(benchmark::State& state) {
  models::ArchitectureDescriptor arch;
  const models::ModelBundle bundle = models::init_bundle(arch, 5);
  const Tensor x = random_tensor(Shape{64, 32, 32, 3}, 6, 0.0f, 1.0f);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    Graph g;
    auto enc = models::bind(g, bundle.net(models::NetId::class_encoder), true);
    auto cls = models::bind(g, bundle.net(models::NetId::classifier), true);
    Var loss = numerics::mean_cross_entropy(models::classify(arch, cls, models::encode(arch, enc, g.constant(x))), labels);
    benchmark::DoNotOptimize(numerics::gradients(g, loss, enc.vars));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_EncoderStep)->Unit(benchmark::kMillisecond);

void BM_DomainGaps(benchmark::State& state) {
  const Tensor targets = random_tensor(Shape{1000, 64}, 7), source = random_tensor(Shape{1000, 64}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(curriculum::domain_gaps(targets, source));
  state.SetItemsProcessed(state.iterations() * 1000 * 1000);
}
BENCHMARK(BM_DomainGaps)->Unit(benchmark::kMillisecond);

void BM_KnnProbe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor f = random_tensor(Shape{n, 64}, 9);
  std::vector<int> tags(n);
  for (std::size_t i = 0; i < n; ++i) tags[i] = static_cast<int>(i % 3);
  for (auto _ : state) benchmark::DoNotOptimize(harness::knn_domain_probe(f, tags, 10));
}
BENCHMARK(BM_KnnProbe)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
