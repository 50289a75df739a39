#pragma once

#include <cstdint>
#include <vector>

#include "latent_steer/environment.hpp"
#include "latent_steer/policy.hpp"
#include "latent_steer/random.hpp"

namespace latent_steer {

/// Seeded start-state pool. Entry i is sample_latent(derive_seed(seed, i), d),
/// so the pool needs no storage and is identical across runs.
class StartPool {
 public:
  StartPool(std::uint64_t seed, std::int64_t size, int d);

  std::int64_t size() const noexcept { return size_; }
  int d() const noexcept { return d_; }
  LatentVector at(std::int64_t index) const;
  LatentVector draw(Rng& rng) const;

 private:
  std::uint64_t seed_;
  std::int64_t size_;
  int d_;
};

struct FinishedEpisode {
  int env = 0;
  std::int64_t index = 0;  // per-env episode number
  Conditioning conditioning = Conditioning::ascending;
  double episode_return = 0.0;
  int steps = 0;
  DoneReason reason = DoneReason::running;
};

/// One environment instance with its own RNG streams and episode counter.
struct EnvSlot {
  EpisodeState state;
  Rng pool_rng;
  Rng action_rng;
  Conditioning initial_conditioning = Conditioning::ascending;
  std::int64_t episodes_started = 0;
  double episode_return = 0.0;
  int episode_steps = 0;
};

/// n environments stepped in lockstep. Episodes auto-reset from the pool;
/// the conditioning of env i flips after every `switch_every` of its own
/// episodes, starting ascending for even i and descending for odd i.
class VecEnv {
 public:
  VecEnv(const EnvConfig& cfg, Oracle& oracle, const StartPool& pool, int n_envs, std::uint64_t seed,
         int switch_every);

  int size() const noexcept { return static_cast<int>(slots_.size()); }
  EnvSlot& slot(int i) { return slots_[static_cast<std::size_t>(i)]; }
  const EnvSlot& slot(int i) const { return slots_[static_cast<std::size_t>(i)]; }
  const EnvConfig& config() const noexcept { return cfg_; }
  Oracle& oracle() noexcept { return oracle_; }

  /// Conditioning used for episode number `episode` of env `env`.
  Conditioning conditioning_for(int env, std::int64_t episode) const;

  /// Applies one action to env i. Returns the reward; finished episodes are
  /// recorded and the env is reset immediately.
  double step(int i, const ActionVector& a, bool& done, DoneReason& reason);

  std::int64_t pool_draws() const noexcept { return pool_draws_; }
  std::int64_t episodes_started() const;

  /// Drains the list of episodes finished since the last call.
  std::vector<FinishedEpisode> take_finished();

 private:
  void begin_episode(int i);

  EnvConfig cfg_;
  Oracle& oracle_;
  const StartPool& pool_;
  int switch_every_;
  std::vector<EnvSlot> slots_;
  std::vector<FinishedEpisode> finished_;
  std::int64_t pool_draws_ = 0;
};

/// horizon × n_envs transitions, index t·n_envs + env.
struct RolloutBuffer {
  int horizon = 0;
  int n_envs = 0;
  Matrix inputs;   // 3d × N
  Matrix actions;  // (d+2) × N
  Vector log_probs;
  Vector rewards;
  Vector values;
  Vector dones;
  std::vector<DoneReason> done_reasons;
  Vector last_values;  // bootstrap value per env
  bool consumed = false;

  Eigen::Index size() const { return rewards.size(); }
};

/// Runs the policy for `horizon` steps in every env.
RolloutBuffer collect_rollout(const MlpParams& policy, const ValueParams& value, VecEnv& envs,
                              int horizon);

}  // namespace latent_steer
