#include <benchmark/benchmark.h>

#include "latent_steer/algorithms.hpp"
#include "latent_steer/config.hpp"
#include "latent_steer/gae.hpp"
#include "latent_steer/policy.hpp"
#include "latent_steer/rollout.hpp"

using namespace latent_steer;

namespace {

PolicyBatch make_batch(const MlpParams& p, int d, int n, Rng& rng) {
  PolicyBatch b;
  b.inputs = Matrix(3 * d, n);
  b.actions = Matrix(d + 2, n);
  b.old_log_probs = Vector(n);
  b.advantages = Vector(n);
  b.returns = Vector(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3 * d; ++j) b.inputs(j, i) = rng.normal();
    const Vector mean = forward_policy(p, b.inputs.col(i));
    const SampledAction a = sample_action(mean, p.log_std, rng);
    b.actions.col(i) = a.action;
    b.old_log_probs[i] = a.log_prob;
    b.advantages[i] = rng.normal();
    b.returns[i] = rng.normal();
  }
  return b;
}

void BM_PolicyForward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  const MlpParams p = init_policy(d, rng);
  const Vector x = sample_latent(rng, 3 * d);
  for (auto _ : state) {
    Vector y = forward_policy(p, x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_PolicyForward)->Arg(16)->Arg(512);

void BM_Gradients(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int n = 64;
  Rng rng(2);
  const MlpParams p = init_policy(d, rng);
  const ValueParams v = init_value(d, rng);
  const PolicyBatch b = make_batch(p, d, n, rng);
  const LossSpec spec{LossKind::policy_surrogate, SurrogateForm::clipped_ratio, 0.2};
  for (auto _ : state) {
    ParamGrads g = gradients(p, v, b, spec);
    benchmark::DoNotOptimize(g.loss);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Gradients)->Arg(16)->Arg(512);

void BM_Gae(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  Rng rng(3);
  Vector r(T), v(T), done(T);
  for (int i = 0; i < T; ++i) {
    r[i] = rng.normal();
    v[i] = rng.normal();
    done[i] = rng.uniform() < 0.05 ? 1.0 : 0.0;
  }
  for (auto _ : state) {
    AdvantageEstimate a = gae(r, v, done, 0.5, 0.99, 0.95);
    benchmark::DoNotOptimize(a.advantages.data());
  }
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_Gae)->Arg(128)->Arg(2048);

void BM_CollectRollout(benchmark::State& state) {
  const RunConfig cfg = load_config({.profile = std::string("desk")});
  Runtime rt = build_runtime(cfg);
  const int d = rt.env.d();
  const LearnerState learner = LearnerState::initialize(d, cfg.train);
  const StartPool pool(1, cfg.train.pool_size, d);
  VecEnv envs(rt.env, *rt.oracle, pool, cfg.train.n_envs, 2, cfg.train.conditioning_switch_every);
  for (auto _ : state) {
    RolloutBuffer buf = collect_rollout(learner.policy, learner.value, envs, cfg.train.horizon);
    benchmark::DoNotOptimize(buf.rewards.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.train.horizon * cfg.train.n_envs);
}
BENCHMARK(BM_CollectRollout);

}  // namespace
