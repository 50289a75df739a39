#include "latent_steer/environment.hpp"

#include <algorithm>
#include <cmath>

#include "latent_steer/errors.hpp"

namespace latent_steer {

std::string_view to_string(Conditioning c) {
  return c == Conditioning::ascending ? "ascending" : "descending";
}

Conditioning conditioning_from_string(std::string_view name) {
  if (name == "asc" || name == "ascending") return Conditioning::ascending;
  if (name == "dsc" || name == "desc" || name == "descending") return Conditioning::descending;
  throw UsageError("unknown conditioning '" + std::string(name) + "' (use asc or dsc)");
}

Conditioning flipped(Conditioning c) {
  return c == Conditioning::ascending ? Conditioning::descending : Conditioning::ascending;
}

Goal make_goal(const LatentVector& base, Conditioning conditioning) {
  Goal g;
  g.base = base;
  g.conditioning = conditioning;
  g.C = Vector::Constant(base.size(), conditioning == Conditioning::ascending ? 1.0 : 0.0);
  return g;
}

DirectionVector signed_hyperplane(const DirectionVector& k_hyp, Conditioning conditioning) {
  return conditioning == Conditioning::ascending ? k_hyp : -k_hyp;
}

ActionVector ActionVector::from_flat(const Vector& flat) {
  if (flat.size() < 3) throw DimensionError("action vector needs length d + 2 with d >= 1");
  ActionVector a;
  const Eigen::Index d = flat.size() - 2;
  a.k_gen = flat.head(d);
  a.w1 = flat[d];
  a.w2 = flat[d + 1];
  return a;
}

Vector ActionVector::flat() const {
  Vector out(k_gen.size() + 2);
  out.head(k_gen.size()) = k_gen;
  out[k_gen.size()] = w1;
  out[k_gen.size() + 1] = w2;
  return out;
}

LatentVector transition(const LatentVector& s, const ActionVector& a, const DirectionVector& k_hyp_g,
                        double T) {
  if (a.k_gen.size() != s.size() || k_hyp_g.size() != s.size()) {
    throw DimensionError("transition: state, k_gen and hyperplane lengths differ");
  }
  return s + (1.0 - T) * (a.w1 * k_hyp_g.values() + a.w2 * a.k_gen);
}

int BucketSpec::count() const {
  return static_cast<int>(std::llround((hi - lo) / width));
}

void BucketSpec::validate() const {
  if (!(width > 0.0) || !(hi > lo)) throw ConfigError("buckets: need width > 0 and hi > lo");
  const double n = (hi - lo) / width;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw ConfigError("buckets: (hi - lo) must be divisible by width");
  }
}

int bucket_of(double age, const BucketSpec& spec) {
  const int n = spec.count();
  const double idx = std::floor((age - spec.lo) / spec.width);
  if (!(idx >= 0.0)) return 0;  // also catches NaN
  if (idx >= static_cast<double>(n - 1)) return n - 1;
  return static_cast<int>(idx);
}

std::vector<int> eligible_buckets(int base_bucket, int bucket_count, Conditioning conditioning) {
  std::vector<int> out;
  if (conditioning == Conditioning::ascending) {
    for (int b = base_bucket + 1; b < bucket_count; ++b) out.push_back(b);
  } else {
    for (int b = base_bucket - 1; b >= 0; --b) out.push_back(b);
  }
  return out;
}

bool age_gate(double age_t, double age_base, int bucket, const std::vector<bool>& visited,
              Conditioning conditioning) {
  if (bucket < 0 || static_cast<std::size_t>(bucket) >= visited.size()) {
    throw DimensionError("age_gate: bucket index out of range");
  }
  const bool unvisited = !visited[static_cast<std::size_t>(bucket)];
  if (conditioning == Conditioning::ascending) return age_t > age_base && unvisited;
  return age_t < age_base && unvisited;
}

double identity_distance(const FeatureVector& f_t, const FeatureVector& f_base) {
  if (f_t.size() != f_base.size()) throw DimensionError("identity_distance: feature length mismatch");
  return (f_t - f_base).squaredNorm();
}

void RewardConfig::validate() const {
  if (!(r > 0.0)) throw ConfigError("rewards.r must be > 0");
  if (!(n > 0.0)) throw ConfigError("rewards.n must be > 0");
  if (!(m >= 1.0)) throw ConfigError("rewards.m must be >= 1");
  if (!(P1 > 0.0)) throw ConfigError("rewards.P1 must be > 0");
  if (!(P1 < P2)) throw ConfigError("rewards: P1 < P2 is required");
}

RewardOutcome reward(double I_g, bool M_g, bool Z_g, const RewardConfig& cfg) {
  if (I_g > cfg.P2 || !Z_g) return {-cfg.n, true};
  if (I_g <= cfg.P1 && M_g) return {cfg.m * cfg.r, false};
  if (M_g) return {cfg.r, false};  // P1 < I_g <= P2 here
  return {-1.0, false};
}

void EnvConfig::validate() const {
  if (!(T >= 0.0 && T < 1.0)) throw ConfigError("env.T must lie in [0, 1)");
  if (episode_length < 1) throw ConfigError("env.episode_length must be >= 1");
  typical.validate();
  buckets.validate();
  rewards.validate();
  if (k_hyp.size() != typical.d) throw ConfigError("env: k_hyp length differs from d");
}

std::string_view to_string(DoneReason r) {
  switch (r) {
    case DoneReason::running: return "running";
    case DoneReason::success: return "success";
    case DoneReason::catastrophe_identity: return "catastrophe_identity";
    case DoneReason::catastrophe_typicality: return "catastrophe_typicality";
    case DoneReason::timeout: return "timeout";
  }
  return "running";
}

DoneReason done_reason_from_string(std::string_view name) {
  for (auto r : {DoneReason::running, DoneReason::success, DoneReason::catastrophe_identity,
                 DoneReason::catastrophe_typicality, DoneReason::timeout}) {
    if (to_string(r) == name) return r;
  }
  throw UsageError("unknown done_reason '" + std::string(name) + "'");
}

int EpisodeState::visited_count() const {
  return static_cast<int>(std::count(visited.begin(), visited.end(), true));
}

bool all_eligible_visited(const EpisodeState& state, const BucketSpec& spec) {
  for (int b : eligible_buckets(state.base_bucket, spec.count(), state.goal.conditioning)) {
    if (!state.visited[static_cast<std::size_t>(b)]) return false;
  }
  return true;
}

EpisodeState reset(const Goal& goal, const EnvConfig& cfg, Oracle& oracle) {
  const int d = cfg.d();
  if (goal.base.size() != d || goal.C.size() != d) throw DimensionError("reset: goal length differs from d");
  EpisodeState state;
  state.goal = goal;
  state.s = cfg.shell_project_start ? project_to_shell(goal.base, d) : goal.base;
  // The base point is the shell-projected start, so I_g and M_g compare
  // against what the episode actually starts from.
  state.goal.base = state.s;
  state.age_base = oracle.age_of(state.s);
  state.F_base = oracle.identity_features(state.s);
  state.base_bucket = bucket_of(state.age_base, cfg.buckets);
  state.visited.assign(static_cast<std::size_t>(cfg.buckets.count()), false);
  state.visited[static_cast<std::size_t>(state.base_bucket)] = true;

  if (cfg.check_typicality_on_start && !in_typical_set(state.s, cfg.typical)) {
    state.done = true;
    state.done_reason = DoneReason::catastrophe_typicality;
  } else if (all_eligible_visited(state, cfg.buckets)) {
    state.done = true;
    state.done_reason = DoneReason::success;
  }
  return state;
}

StepOutcome step(const EpisodeState& state, const ActionVector& a, const EnvConfig& cfg,
                 Oracle& oracle) {
  if (state.done) throw UsageError("step: episode already finished (" + std::string(to_string(state.done_reason)) + ")");
  if (a.k_gen.size() != cfg.d()) throw DimensionError("step: action length differs from d + 2");

  ActionVector applied = a;
  if (cfg.normalize_k_gen) {
    const double norm = a.k_gen.norm();
    applied.k_gen = norm > 0.0 ? Vector(a.k_gen / norm) : Vector::Zero(a.k_gen.size());
  }
  const DirectionVector k_hyp_g = signed_hyperplane(cfg.k_hyp, state.goal.conditioning);

  StepOutcome out;
  out.next_state = state;
  EpisodeState& next = out.next_state;
  next.s = transition(state.s, applied, k_hyp_g, cfg.T);
  next.t = state.t + 1;

  StepInfo& info = out.info;
  info.typicality_score = typicality_score(next.s, cfg.typical);
  info.Z_g = info.typicality_score <= cfg.typical.epsilon;
  info.age = oracle.age_of(next.s);
  info.bucket = bucket_of(info.age, cfg.buckets);
  info.M_g = age_gate(info.age, state.age_base, info.bucket, state.visited, state.goal.conditioning);
  info.I_g = identity_distance(oracle.identity_features(next.s), state.F_base);

  const RewardOutcome r = reward(info.I_g, info.M_g, info.Z_g, cfg.rewards);
  out.reward = r.reward;
  if (r.reward > 0.0) next.visited[static_cast<std::size_t>(info.bucket)] = true;

  if (r.terminal) {
    next.done = true;
    next.done_reason = info.Z_g ? DoneReason::catastrophe_identity : DoneReason::catastrophe_typicality;
  } else if (all_eligible_visited(next, cfg.buckets)) {
    next.done = true;
    next.done_reason = DoneReason::success;
  } else if (next.t >= cfg.episode_length) {
    next.done = true;
    next.done_reason = DoneReason::timeout;
  }
  return out;
}

}  // namespace latent_steer
