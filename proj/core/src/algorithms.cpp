#include "latent_steer/algorithms.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "latent_steer/errors.hpp"

namespace latent_steer {

std::string_view to_string(Algo a) { return a == Algo::ppo ? "ppo" : "a2c"; }

Algo algo_from_string(std::string_view name) {
  if (name == "ppo") return Algo::ppo;
  if (name == "a2c") return Algo::a2c;
  throw UsageError("unknown algorithm '" + std::string(name) + "' (use ppo or a2c)");
}

TrainConfig TrainConfig::defaults_for(Algo algo) {
  TrainConfig cfg;
  cfg.algo = algo;
  if (algo == Algo::a2c) {
    cfg.learning_rate = 7e-4;
    cfg.entropy_coef = 0.01;
  }
  return cfg;
}

void TrainConfig::validate() const {
  std::ostringstream errs;
  if (total_steps < 1) errs << " train.total_steps must be >= 1;";
  if (horizon < 1) errs << " train.horizon must be >= 1;";
  if (n_envs < 1) errs << " train.n_envs must be >= 1;";
  if (!(gamma > 0.0 && gamma <= 1.0)) errs << " train.gamma must lie in (0, 1];";
  if (!(lambda >= 0.0 && lambda <= 1.0)) errs << " train.lambda must lie in [0, 1];";
  if (!(clip_ratio > 0.0)) errs << " train.clip_ratio must be > 0;";
  if (!(learning_rate > 0.0)) errs << " train.learning_rate must be > 0;";
  if (epochs < 1) errs << " train.epochs must be >= 1;";
  if (minibatches < 1) errs << " train.minibatches must be >= 1;";
  if (minibatches > horizon * n_envs) errs << " train.minibatches exceeds the batch size;";
  if (pool_size < 1) errs << " train.pool_size must be >= 1;";
  if (conditioning_switch_every < 1) errs << " train.conditioning_switch_every must be >= 1;";
  if (checkpoint_every < 1) errs << " train.checkpoint_every must be >= 1;";
  if (curve_window < 1) errs << " train.curve_window must be >= 1;";
  const std::string msg = errs.str();
  if (!msg.empty()) throw ConfigError("invalid train config:" + msg);
}

LearnerState LearnerState::initialize(int d, const TrainConfig& cfg) {
  Rng init_rng(derive_seed(cfg.seed, 0x1A17));
  LearnerState s;
  s.policy = init_policy(d, init_rng);
  s.value = init_value(d, init_rng);
  AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  ac.beta1 = cfg.adam_beta1;
  ac.beta2 = cfg.adam_beta2;
  ac.epsilon = cfg.adam_epsilon;
  s.optimizer = Adam(s.flat_parameters().size(), ac);
  s.shuffle_rng = Rng(derive_seed(cfg.seed, 0x5F1E));
  return s;
}

Vector LearnerState::flat_parameters() const {
  const Vector p = policy.net.flatten();
  const Vector v = value.net.flatten();
  Vector flat(p.size() + policy.log_std.size() + v.size());
  flat << p, policy.log_std, v;
  return flat;
}

void LearnerState::assign_flat(const Vector& flat) {
  const Eigen::Index np = policy.net.parameter_count();
  const Eigen::Index nl = policy.log_std.size();
  const Eigen::Index nv = value.net.parameter_count();
  if (flat.size() != np + nl + nv) throw DimensionError("learner: flat parameter length mismatch");
  policy.net.assign(flat.head(np));
  policy.log_std = flat.segment(np, nl);
  value.net.assign(flat.tail(nv));
}

AdvantageEstimate buffer_advantages(const RolloutBuffer& buffer, double gamma, double lambda) {
  const int h = buffer.horizon;
  const int n = buffer.n_envs;
  AdvantageEstimate out;
  out.advantages.resize(buffer.size());
  out.returns.resize(buffer.size());
  Vector r(h), v(h), dn(h);
  for (int e = 0; e < n; ++e) {
    for (int t = 0; t < h; ++t) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * n + e;
      r[t] = buffer.rewards[idx];
      v[t] = buffer.values[idx];
      dn[t] = buffer.dones[idx];
    }
    const AdvantageEstimate seq = gae(r, v, dn, buffer.last_values[e], gamma, lambda);
    for (int t = 0; t < h; ++t) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * n + e;
      out.advantages[idx] = seq.advantages[t];
      out.returns[idx] = seq.returns[t];
    }
  }
  return out;
}

Vector normalize_advantages(const Vector& adv) {
  if (adv.size() == 0) return adv;
  const double mean = adv.mean();
  const Vector centered = adv.array() - mean;
  const double std = std::sqrt(centered.squaredNorm() / static_cast<double>(adv.size()));
  return centered / (std + 1e-8);
}

CombinedGradient combined_gradient(const LearnerState& state, const PolicyBatch& batch,
                                   const LossSpec& surrogate, double value_coef, double entropy_coef) {
  const ParamGrads pg = gradients(state.policy, state.value, batch, surrogate);
  LossSpec vspec;
  vspec.kind = LossKind::value_mse;
  const ParamGrads vg = gradients(state.policy, state.value, batch, vspec);

  CombinedGradient out;
  out.policy_loss = pg.loss;
  out.value_loss = vg.loss;
  out.entropy = entropy(state.policy.log_std);
  out.clip_fraction = pg.clip_fraction;
  out.approx_kl = pg.approx_kl;

  const Vector gp = pg.policy_net.flatten();
  // d(−c·H)/d log_std = −c
  const Vector gl = pg.log_std.array() - entropy_coef;
  const Vector gv = value_coef * vg.value_net.flatten();
  out.flat.resize(gp.size() + gl.size() + gv.size());
  out.flat << gp, gl, gv;
  return out;
}

namespace {

PolicyBatch gather(const RolloutBuffer& buf, const AdvantageEstimate& est,
                   const std::vector<Eigen::Index>& idx) {
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  PolicyBatch b;
  b.inputs.resize(buf.inputs.rows(), n);
  b.actions.resize(buf.actions.rows(), n);
  b.old_log_probs.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index i = idx[static_cast<std::size_t>(j)];
    b.inputs.col(j) = buf.inputs.col(i);
    b.actions.col(j) = buf.actions.col(i);
    b.old_log_probs[j] = buf.log_probs[i];
    b.advantages[j] = est.advantages[i];
    b.returns[j] = est.returns[i];
  }
  return b;
}

void apply(LearnerState& state, CombinedGradient& g, double max_grad_norm, UpdateStats& stats) {
  const double loss = g.policy_loss + g.value_loss;
  if (!std::isfinite(loss) || !g.flat.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite loss (policy=" << g.policy_loss << ", value=" << g.value_loss
        << ", entropy=" << g.entropy << ")";
    throw NumericalError(msg.str());
  }
  stats.grad_norm = clip_grad_norm(g.flat, max_grad_norm);
  Vector params = state.flat_parameters();
  state.optimizer.step(params, g.flat);
  state.assign_flat(params);
}

void mark_consumed(RolloutBuffer& buffer) {
  if (buffer.consumed) throw UsageError("rollout buffer already consumed by an update");
  buffer.consumed = true;
}

}  // namespace

UpdateStats a2c_update(RolloutBuffer& buffer, LearnerState& state, const TrainConfig& cfg) {
  mark_consumed(buffer);
  AdvantageEstimate est = buffer_advantages(buffer, cfg.gamma, cfg.lambda);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(buffer.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  PolicyBatch batch = gather(buffer, est, all);
  batch.advantages = normalize_advantages(batch.advantages);

  LossSpec spec;
  spec.form = SurrogateForm::log_prob;
  CombinedGradient g = combined_gradient(state, batch, spec, cfg.value_coef, cfg.entropy_coef);
  UpdateStats stats;
  stats.policy_loss = g.policy_loss;
  stats.value_loss = g.value_loss;
  stats.entropy = g.entropy;
  apply(state, g, cfg.max_grad_norm, stats);
  return stats;
}

UpdateStats ppo_update(RolloutBuffer& buffer, LearnerState& state, const TrainConfig& cfg) {
  mark_consumed(buffer);
  const AdvantageEstimate est = buffer_advantages(buffer, cfg.gamma, cfg.lambda);
  const Eigen::Index total = buffer.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  LossSpec spec;
  spec.form = SurrogateForm::clipped_ratio;
  spec.clip = cfg.clip_ratio;

  UpdateStats stats;
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher–Yates with the library RNG; std::shuffle is implementation-defined.
    for (Eigen::Index i = total - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(state.shuffle_rng.index(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      const Eigen::Index begin = total * mb / cfg.minibatches;
      const Eigen::Index end = total * (mb + 1) / cfg.minibatches;
      std::vector<Eigen::Index> idx(order.begin() + begin, order.begin() + end);
      PolicyBatch batch = gather(buffer, est, idx);
      batch.advantages = normalize_advantages(batch.advantages);
      CombinedGradient g = combined_gradient(state, batch, spec, cfg.value_coef, cfg.entropy_coef);
      stats.policy_loss += g.policy_loss;
      stats.value_loss += g.value_loss;
      stats.entropy += g.entropy;
      stats.clip_fraction += g.clip_fraction;
      stats.approx_kl += g.approx_kl;
      UpdateStats step_stats;
      apply(state, g, cfg.max_grad_norm, step_stats);
      stats.grad_norm += step_stats.grad_norm;
      ++count;
    }
  }
  const double inv = 1.0 / count;
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.clip_fraction *= inv;
  stats.approx_kl *= inv;
  stats.grad_norm *= inv;
  return stats;
}

}  // namespace latent_steer
