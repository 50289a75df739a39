#include "latent_steer/rollout.hpp"

#include "latent_steer/errors.hpp"

namespace latent_steer {

StartPool::StartPool(std::uint64_t seed, std::int64_t size, int d) : seed_(seed), size_(size), d_(d) {
  if (size < 1) throw ConfigError("start pool: size must be >= 1");
  if (d < 1) throw DimensionError("start pool: d must be >= 1");
}

LatentVector StartPool::at(std::int64_t index) const {
  if (index < 0 || index >= size_) throw UsageError("start pool: index out of range");
  return sample_latent(derive_seed(seed_, static_cast<std::uint64_t>(index)), d_);
}

LatentVector StartPool::draw(Rng& rng) const {
  return at(static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(size_))));
}

// ---------------------------------------------------------------------------

namespace {
constexpr int kMaxTrivialResets = 10'000;
}

VecEnv::VecEnv(const EnvConfig& cfg, Oracle& oracle, const StartPool& pool, int n_envs,
               std::uint64_t seed, int switch_every)
    : cfg_(cfg), oracle_(oracle), pool_(pool), switch_every_(switch_every) {
  if (n_envs < 1) throw ConfigError("n_envs must be >= 1");
  if (switch_every < 1) throw ConfigError("conditioning_switch_every must be >= 1");
  if (pool.d() != cfg.d()) throw DimensionError("start pool dimension differs from env d");
  cfg_.validate();
  slots_.resize(static_cast<std::size_t>(n_envs));
  for (int i = 0; i < n_envs; ++i) {
    EnvSlot& s = slots_[static_cast<std::size_t>(i)];
    s.pool_rng = Rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(i)));
    s.action_rng = Rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
    s.initial_conditioning = i % 2 == 0 ? Conditioning::ascending : Conditioning::descending;
    begin_episode(i);
  }
}

Conditioning VecEnv::conditioning_for(int env, std::int64_t episode) const {
  const Conditioning c0 = slots_[static_cast<std::size_t>(env)].initial_conditioning;
  return (episode / switch_every_) % 2 == 0 ? c0 : flipped(c0);
}

void VecEnv::begin_episode(int i) {
  EnvSlot& s = slots_[static_cast<std::size_t>(i)];
  for (int attempt = 0; attempt < kMaxTrivialResets; ++attempt) {
    const std::int64_t episode = s.episodes_started++;
    const Conditioning c = conditioning_for(i, episode);
    ++pool_draws_;
    s.state = reset(make_goal(pool_.draw(s.pool_rng), c), cfg_, oracle_);
    s.episode_return = 0.0;
    s.episode_steps = 0;
    if (!s.state.done) return;
    // Nothing to do from this start (no eligible bucket): a zero-step episode.
    finished_.push_back({i, episode, c, 0.0, 0, s.state.done_reason});
  }
  throw UsageError("every drawn start state finishes at reset; check bucket and oracle settings");
}

double VecEnv::step(int i, const ActionVector& a, bool& done, DoneReason& reason) {
  EnvSlot& s = slots_[static_cast<std::size_t>(i)];
  StepOutcome out = latent_steer::step(s.state, a, cfg_, oracle_);
  s.state = std::move(out.next_state);
  s.episode_return += out.reward;
  ++s.episode_steps;
  done = s.state.done;
  reason = s.state.done_reason;
  if (done) {
    finished_.push_back({i, s.episodes_started - 1, s.state.goal.conditioning, s.episode_return,
                         s.episode_steps, reason});
    begin_episode(i);
  }
  return out.reward;
}

std::int64_t VecEnv::episodes_started() const {
  std::int64_t total = 0;
  for (const auto& s : slots_) total += s.episodes_started;
  return total;
}

std::vector<FinishedEpisode> VecEnv::take_finished() {
  std::vector<FinishedEpisode> out;
  out.swap(finished_);
  return out;
}

// ---------------------------------------------------------------------------

RolloutBuffer collect_rollout(const MlpParams& policy, const ValueParams& value, VecEnv& envs,
                              int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const int n_envs = envs.size();
  const int d = envs.config().d();
  if (policy.d() != d) throw DimensionError("collect_rollout: policy d differs from env d");
  const double scale = input_scale(d);
  const Eigen::Index total = static_cast<Eigen::Index>(horizon) * n_envs;

  RolloutBuffer buf;
  buf.horizon = horizon;
  buf.n_envs = n_envs;
  buf.inputs.resize(3 * d, total);
  buf.actions.resize(d + 2, total);
  buf.log_probs.resize(total);
  buf.rewards.resize(total);
  buf.values.resize(total);
  buf.dones.resize(total);
  buf.done_reasons.resize(static_cast<std::size_t>(total));

  Matrix x(3 * d, n_envs);
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      const EpisodeState& st = envs.slot(e).state;
      x.col(e) = build_input(st.s, st.goal, scale);
    }
    const Matrix means = policy.net.forward(x);
    const Matrix vals = value.net.forward(x);
    for (int e = 0; e < n_envs; ++e) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * n_envs + e;
      SampledAction sa = sample_action(means.col(e), policy.log_std, envs.slot(e).action_rng);
      bool done = false;
      DoneReason reason = DoneReason::running;
      const double r = envs.step(e, ActionVector::from_flat(sa.action), done, reason);
      buf.inputs.col(idx) = x.col(e);
      buf.actions.col(idx) = sa.action;
      buf.log_probs[idx] = sa.log_prob;
      buf.values[idx] = vals(0, e);
      buf.rewards[idx] = r;
      buf.dones[idx] = done ? 1.0 : 0.0;
      buf.done_reasons[static_cast<std::size_t>(idx)] = reason;
    }
  }
  for (int e = 0; e < n_envs; ++e) {
    const EpisodeState& st = envs.slot(e).state;
    x.col(e) = build_input(st.s, st.goal, scale);
  }
  buf.last_values = value.net.forward(x).row(0).transpose();
  return buf;
}

}  // namespace latent_steer
