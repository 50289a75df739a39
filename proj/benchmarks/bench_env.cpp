#include <benchmark/benchmark.h>

#include "latent_steer/config.hpp"
#include "latent_steer/environment.hpp"
#include "latent_steer/oracle.hpp"

using namespace latent_steer;

namespace {

// d=16 desk setting or d=512 with the default table.
Runtime runtime_for(int d) {
  if (d == 16) return build_runtime(load_config({.profile = std::string("desk")}));
  return build_runtime(load_config({.overrides = {"env.d=512"}}));
}

// Episodes starting in the edge bucket finish on reset; draw until one does not.
EpisodeState fresh(Runtime& rt, Rng& rng) {
  for (;;) {
    EpisodeState s = reset(make_goal(sample_latent(rng, rt.env.d()), Conditioning::ascending), rt.env, *rt.oracle);
    if (!s.done) return s;
  }
}

void BM_EnvStep(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Runtime rt = runtime_for(d);
  Rng rng(1);
  EpisodeState s = fresh(rt, rng);
  const ActionVector a{0.01 * sample_latent(rng, d), 0.05, 0.01};
  for (auto _ : state) {
    StepOutcome out = step(s, a, rt.env, *rt.oracle);
    benchmark::DoNotOptimize(out.reward);
    if (out.next_state.done) {
      s = fresh(rt, rng);
    } else {
      s = std::move(out.next_state);
    }
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep)->Arg(16)->Arg(512);

void BM_OracleBatch(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  SyntheticOracle oracle(SyntheticOracleSpec::random(d, 7, 3.0, 30.0, 0.75));
  Rng rng(2);
  std::vector<LatentVector> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(sample_latent(rng, d));
  for (auto _ : state) {
    auto f = oracle.identity_features(batch);
    benchmark::DoNotOptimize(f.data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_OracleBatch)->Arg(16)->Arg(512);

void BM_TypicalityScore(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const LatentVector s = sample_latent(3, d);
  const TypicalSetSpec spec{d, 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(typicality_score(s, spec));
}
BENCHMARK(BM_TypicalityScore)->Arg(16)->Arg(512);

}  // namespace
