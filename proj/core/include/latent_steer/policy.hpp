#pragma once

#include <limits>

#include "latent_steer/environment.hpp"
#include "latent_steer/geometry.hpp"
#include "latent_steer/random.hpp"

namespace latent_steer {

inline constexpr int kHiddenWidth = 64;

/// Two tanh hidden layers followed by a linear head.
struct Mlp {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  Matrix W3;
  Vector b3;

  static Mlp zeros(int input_dim, int hidden, int output_dim);

  Eigen::Index input_dim() const { return W1.cols(); }
  Eigen::Index output_dim() const { return W3.rows(); }
  Eigen::Index parameter_count() const;

  Vector forward(const Vector& x) const;
  /// Column-batched forward: `x` is input_dim × N.
  Matrix forward(const Matrix& x) const;

  /// Concatenation W1, b1, W2, b2, W3, b3 (column-major within matrices).
  Vector flatten() const;
  void assign(const Vector& flat);

  bool all_finite() const;
};

/// Policy network over [scale·s_t, scale·s_base, C] with a state-independent
/// diagonal-Gaussian head on R^{d+2}.
struct MlpParams {
  Mlp net;
  Vector log_std;

  int d() const { return static_cast<int>(log_std.size()) - 2; }
};

/// Critic: same trunk, scalar output.
struct ValueParams {
  Mlp net;
};

/// Orthogonal weights (√2 gain hidden, `head_gain` output), zero biases.
Mlp init_mlp(int input_dim, int hidden, int output_dim, double head_gain, Rng& rng);
MlpParams init_policy(int d, Rng& rng);
ValueParams init_value(int d, Rng& rng);

/// 1/√d, keeps shell-scale latents out of tanh saturation.
double input_scale(int d);

/// [scale·s_t, scale·s_base, C], length 3d.
Vector build_input(const LatentVector& s_t, const Goal& goal, double scale);

Vector forward_policy(const MlpParams& params, const Vector& x);
double forward_value(const ValueParams& params, const Vector& x);

struct SampledAction {
  Vector action;
  double log_prob = 0.0;
};

/// a = mean + exp(log_std) ⊙ z with z ~ N(0, I).
SampledAction sample_action(const Vector& mean, const Vector& log_std, Rng& rng);

/// Diagonal-Gaussian log density.
double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action);

/// Σ (log_std_i + ½·ln(2πe)).
double entropy(const Vector& log_std);

// --- gradients -------------------------------------------------------------

/// Samples for a gradient evaluation, stored column-wise.
struct PolicyBatch {
  Matrix inputs;       // 3d × N
  Matrix actions;      // (d+2) × N
  Vector old_log_probs;
  Vector advantages;
  Vector returns;      // targets for the value loss

  Eigen::Index size() const { return inputs.cols(); }
};

enum class LossKind { policy_surrogate, value_mse, entropy };

/// How the policy surrogate is formed.
///   log_prob:      −mean(log π(a|x) · Â)
///   clipped_ratio: −mean(min(ρÂ, clip(ρ, 1−c, 1+c)·Â)),  ρ = exp(log π − log π_old)
enum class SurrogateForm { log_prob, clipped_ratio };

struct LossSpec {
  LossKind kind = LossKind::policy_surrogate;
  SurrogateForm form = SurrogateForm::clipped_ratio;
  double clip = std::numeric_limits<double>::infinity();
};

/// d(loss)/d(parameter) for every tensor. Tensors a loss does not touch are zero.
struct ParamGrads {
  double loss = 0.0;
  Mlp policy_net;
  Vector log_std;
  Mlp value_net;
  // Surrogate diagnostics.
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Exact reverse-mode gradient of one scalar loss.
/// Entropy loss is H itself (callers subtract it with a coefficient).
ParamGrads gradients(const MlpParams& policy, const ValueParams& value, const PolicyBatch& batch,
                     const LossSpec& spec);

}  // namespace latent_steer
