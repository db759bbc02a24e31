#include <benchmark/benchmark.h>

#include "esmer/buffer.hpp"
#include "esmer/learners.hpp"
#include "esmer/network.hpp"
#include "esmer/rng.hpp"
#include "esmer/stream.hpp"

namespace {

using namespace esmer;

const NetworkSpec kSpec{32, {128, 128}, 10};

Batch make_batch(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Batch b;
  b.features = Matrix(n, kSpec.input_dim);
  for (std::size_t i = 0; i < b.features.size(); ++i) {
    b.features.data()[i] = rng.next_gaussian();
  }
  b.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    b.labels[i] = static_cast<int>(rng.next_below(kSpec.num_classes));
  }
  return b;
}

std::vector<LabeledSample> make_samples(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<LabeledSample> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].id = i;
    out[i].features.resize(kSpec.input_dim);
    for (double& f : out[i].features) f = rng.next_gaussian();
    out[i].label = static_cast<int>(rng.next_below(kSpec.num_classes));
    out[i].true_label = out[i].label;
  }
  return out;
}

void BM_Forward(benchmark::State& state) {
  const ParamSet params = init_params(kSpec, 1);
  const Batch batch = make_batch(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(params, batch));
  }
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128);

void BM_BackwardWeightedCe(benchmark::State& state) {
  const ParamSet params = init_params(kSpec, 1);
  const Batch batch = make_batch(32, 2);
  const ForwardTrace trace = forward(params, batch);
  const std::vector<double> weights(32, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward_weighted_ce(params, trace, batch.labels, weights));
  }
}
BENCHMARK(BM_BackwardWeightedCe);

void BM_EsmerStep(benchmark::State& state) {
  HyperParams hp;
  hp.buffer_capacity = 100;
  EsmerLearner learner(kSpec, hp, AblationFlags{}, 3);
  const auto samples = make_samples(32, 4);
  for (auto _ : state) {
    learner.step(samples);
  }
}
BENCHMARK(BM_EsmerStep);

void BM_ErStep(benchmark::State& state) {
  HyperParams hp;
  hp.buffer_capacity = 100;
  ErLearner learner(kSpec, hp, 3);
  const auto samples = make_samples(32, 4);
  for (auto _ : state) {
    learner.step(samples);
  }
}
BENCHMARK(BM_ErStep);

void BM_ReservoirOffer(benchmark::State& state) {
  const auto samples = make_samples(1024, 5);
  for (auto _ : state) {
    EpisodicBuffer buffer(100, 7);
    for (const auto& s : samples) {
      BufferItem item;
      item.sample = s;
      buffer.offer(std::move(item));
    }
    benchmark::DoNotOptimize(buffer.size());
  }
}
BENCHMARK(BM_ReservoirOffer);

}  // namespace

BENCHMARK_MAIN();
