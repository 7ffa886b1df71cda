// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "lwdock/anchor.hpp"
#include "lwdock/bench.hpp"
#include "lwdock/identify.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/spec.hpp"
#include "lwdock/specgen.hpp"

namespace lwdock {
namespace {

LoraAdapter noisy_adapter(const AnchorConfig& cfg) {
  LoraAdapter a = init_adapter(cfg);
  Rng rng(1);
  for (auto& b : a.b) {
    for (double& x : b.data) x = rng.normal(0.0, 0.05);
  }
  return a;
}

std::vector<Sample> batch_of(const AnchorConfig& cfg, std::size_t n) {
  Rng rng(2);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({tokenize(random_text(rng, 32), cfg.max_len), i % cfg.num_classes});
  return out;
}

Specification spec_with(const AnchorConfig& cfg, Rng& rng) {
  LoraAdapter a = init_adapter(cfg);
  for (auto& b : a.b) {
    for (double& x : b.data) x = rng.normal();
  }
  return make_specification(cfg, a, SpecMode::kDeveloper);
}

void BM_Forward(benchmark::State& state) {
  const AnchorConfig cfg;
  const AnchorModel m = init_anchor(cfg);
  const LoraAdapter a = noisy_adapter(cfg);
  const AdaptedModel model(m, a);
  const auto batch = batch_of(cfg, 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(batch[0].seq));
}
BENCHMARK(BM_Forward);

void BM_LossAndGrad(benchmark::State& state) {
  const AnchorConfig cfg;
  const AnchorModel m = init_anchor(cfg);
  const LoraAdapter a = noisy_adapter(cfg);
  const AdaptedModel model(m, a);
  const auto batch = batch_of(cfg, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_grad(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Arg(1)->Arg(8);

void BM_BuildSpecToy(benchmark::State& state) {
  const AnchorConfig cfg;
  const AnchorModel m = init_anchor(cfg);
  const auto data = sample_dataset(make_family(cfg, 1), 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_spec(m, data, GroundTruth{}, toy_preset()));
}
BENCHMARK(BM_BuildSpecToy)->Unit(benchmark::kMillisecond);

void BM_Cosine(benchmark::State& state) {
  const AnchorConfig cfg;
  Rng rng(3);
  const Specification u = spec_with(cfg, rng);
  const Specification v = spec_with(cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cosine(u.vector, v.vector));
}
BENCHMARK(BM_Cosine);

void BM_Identify(benchmark::State& state) {
  const AnchorConfig cfg;
  Rng rng(4);
  Registry reg = Registry::in_memory(cfg);
  for (std::int64_t i = 0; i < state.range(0); ++i) reg.submit("u", spec_with(cfg, rng));
  const Specification q = spec_with(cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(identify(reg, q, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Identify)->Arg(16)->Arg(1000);

void BM_CodecRoundTrip(benchmark::State& state) {
  const AnchorConfig cfg;
  Rng rng(5);
  const Specification s = spec_with(cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(read_spec_file(write_spec_file(s)));
}
BENCHMARK(BM_CodecRoundTrip);

}  // namespace
}  // namespace lwdock

BENCHMARK_MAIN();
