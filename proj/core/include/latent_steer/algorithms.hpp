#pragma once

#include <cstdint>
#include <string_view>

#include "latent_steer/gae.hpp"
#include "latent_steer/optimizer.hpp"
#include "latent_steer/policy.hpp"
#include "latent_steer/random.hpp"
#include "latent_steer/rollout.hpp"

namespace latent_steer {

enum class Algo { ppo, a2c };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view name);

struct TrainConfig {
  Algo algo = Algo::ppo;
  std::int64_t total_steps = 1'000'000;
  int horizon = 128;
  int n_envs = 8;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_ratio = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatches = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  /// Global gradient-norm cap; <= 0 disables.
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-5;
  std::int64_t pool_size = 60'000;
  int conditioning_switch_every = 100;
  std::uint64_t seed = 0;
  /// Checkpoint cadence in updates; the final checkpoint is always written.
  int checkpoint_every = 50;
  /// Episodes in the running window behind the reward curve.
  int curve_window = 100;

  /// Paper-silent defaults of the chosen algorithm family.
  static TrainConfig defaults_for(Algo algo);
  void validate() const;
};

/// Parameters plus the optimizer over their concatenation
/// [policy.net, policy.log_std, value.net].
struct LearnerState {
  MlpParams policy;
  ValueParams value;
  Adam optimizer;
  Rng shuffle_rng;

  static LearnerState initialize(int d, const TrainConfig& cfg);
  Vector flat_parameters() const;
  void assign_flat(const Vector& flat);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  double mean_return = 0.0;  // running mean over the trainer's episode window
};

/// GAE applied per env over the buffer; returns advantages/returns in buffer order.
AdvantageEstimate buffer_advantages(const RolloutBuffer& buffer, double gamma, double lambda);

/// (x − mean)/(std + 1e-8).
Vector normalize_advantages(const Vector& adv);

/// Joint gradient of the full loss on one batch, flattened like LearnerState.
struct CombinedGradient {
  Vector flat;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// loss = surrogate + value_coef·MSE − entropy_coef·H
CombinedGradient combined_gradient(const LearnerState& state, const PolicyBatch& batch,
                                   const LossSpec& surrogate, double value_coef, double entropy_coef);

/// One gradient step on the whole buffer with the log-prob surrogate.
UpdateStats a2c_update(RolloutBuffer& buffer, LearnerState& state, const TrainConfig& cfg);

/// epochs × minibatches steps on the clipped-ratio surrogate.
UpdateStats ppo_update(RolloutBuffer& buffer, LearnerState& state, const TrainConfig& cfg);

}  // namespace latent_steer
