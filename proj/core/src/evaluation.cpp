#include "latent_steer/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "latent_steer/checkpoint.hpp"
#include "latent_steer/errors.hpp"
#include "latent_steer/trajectory_io.hpp"

namespace latent_steer {
namespace {

bool beyond_base(double age, double age_base, Conditioning c) {
  return c == Conditioning::ascending ? age > age_base : age < age_base;
}

int count_reached(const std::vector<bool>& reached) {
  return static_cast<int>(std::count(reached.begin(), reached.end(), true));
}

}  // namespace

double TrajectoryRecord::episode_return() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

int buckets_reached(const TrajectoryRecord& traj, const BucketSpec& spec) {
  const auto eligible = eligible_buckets(traj.base_bucket, spec.count(), traj.conditioning);
  int count = 0;
  for (int b : eligible) {
    for (const auto& s : traj.steps) {
      if (beyond_base(s.age, traj.age_base, traj.conditioning) && bucket_of(s.age, spec) == b) {
        ++count;
        break;
      }
    }
  }
  return count;
}

MetricsReport evaluate_trajectory(const TrajectoryRecord& traj, Oracle& oracle, const EnvConfig& cfg) {
  MetricsReport m;
  m.eligible = static_cast<int>(
      eligible_buckets(traj.base_bucket, cfg.buckets.count(), traj.conditioning).size());
  m.buckets_reached = buckets_reached(traj, cfg.buckets);
  m.bucket_coverage = m.eligible == 0 ? 1.0 : static_cast<double>(m.buckets_reached) / m.eligible;
  m.episode_return = traj.episode_return();
  m.steps = static_cast<int>(traj.steps.size());

  const FeatureVector f_base = oracle.identity_features(traj.base);
  if (traj.steps.empty()) {
    // Scored at the base point: identical features, on whatever side of the shell the base is.
    m.identity_cosine_mean = m.identity_cosine_min = m.bucket_cosine_mean = cosine_similarity(f_base, f_base);
    m.typicality_violation_rate = in_typical_set(traj.base, cfg.typical) ? 0.0 : 1.0;
    return m;
  }

  std::vector<LatentVector> latents;
  latents.reserve(traj.steps.size());
  for (const auto& s : traj.steps) {
    if (!s.latent) throw UsageError("evaluate_trajectory: trajectory was recorded without latents");
    latents.push_back(*s.latent);
  }
  const auto features = oracle.identity_features(std::span<const LatentVector>(latents));

  const auto eligible = eligible_buckets(traj.base_bucket, cfg.buckets.count(), traj.conditioning);
  std::vector<bool> seen(static_cast<std::size_t>(cfg.buckets.count()), false);
  double cos_sum = 0.0;
  double bucket_sum = 0.0;
  int bucket_n = 0;
  double sq_sum = 0.0;
  int violations = 0;
  m.identity_cosine_min = 1.0;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const double c = cosine_similarity(features[i], f_base);
    cos_sum += c;
    const TrajectoryStep& st = traj.steps[i];
    const int b = bucket_of(st.age, cfg.buckets);
    if (beyond_base(st.age, traj.age_base, traj.conditioning) && !seen[static_cast<std::size_t>(b)] &&
        std::find(eligible.begin(), eligible.end(), b) != eligible.end()) {
      seen[static_cast<std::size_t>(b)] = true;
      bucket_sum += c;
      ++bucket_n;
    }
    m.identity_cosine_min = std::min(m.identity_cosine_min, c);
    const double sq = identity_distance(features[i], f_base);
    sq_sum += sq;
    m.final_identity_sqdist = sq;
    if (!in_typical_set(latents[i], cfg.typical)) ++violations;
  }
  const double n = static_cast<double>(latents.size());
  m.identity_cosine_mean = cos_sum / n;
  m.bucket_cosine_mean = bucket_n > 0 ? bucket_sum / bucket_n : m.identity_cosine_mean;
  m.identity_sqdist = sq_sum / n;
  m.typicality_violation_rate = violations / n;
  return m;
}

TrajectoryRecord run_policy_episode(const MlpParams& policy, const LatentVector& base,
                                    Conditioning conditioning, const EnvConfig& cfg, Oracle& oracle,
                                    Rng& rng, ActionMode mode, const std::string& method) {
  if (policy.d() != cfg.d()) throw DimensionError("run_policy_episode: policy/env dimension mismatch");
  EpisodeState state = reset(make_goal(base, conditioning), cfg, oracle);
  TrajectoryRecord rec;
  rec.method = method;
  rec.base = state.s;
  rec.conditioning = conditioning;
  rec.age_base = state.age_base;
  rec.base_bucket = state.base_bucket;
  const double scale = input_scale(cfg.d());
  while (!state.done) {
    const Vector mean = forward_policy(policy, build_input(state.s, state.goal, scale));
    const Vector action =
        mode == ActionMode::mean ? mean : sample_action(mean, policy.log_std, rng).action;
    StepOutcome out = step(state, ActionVector::from_flat(action), cfg, oracle);
    TrajectoryStep ts;
    ts.index = out.next_state.t;
    ts.latent = out.next_state.s;
    ts.age = out.info.age;
    ts.bucket = out.info.bucket;
    ts.I_g = out.info.I_g;
    ts.typicality_score = out.info.typicality_score;
    ts.reward = out.reward;
    rec.steps.push_back(std::move(ts));
    state = std::move(out.next_state);
  }
  rec.done_reason = state.done_reason;
  return rec;
}

TrajectoryRecord run_linear_episode(const LatentVector& base, Conditioning conditioning,
                                    const DirectionVector& k, double step_size, int n_steps,
                                    const EnvConfig& cfg, Oracle& oracle, const std::string& method,
                                    std::optional<int> stop_after_buckets) {
  const int d = cfg.d();
  if (base.size() != d || k.size() != d) throw DimensionError("run_linear_episode: dimension mismatch");
  if (n_steps < 1) throw UsageError("run_linear_episode: n_steps must be >= 1");
  TrajectoryRecord rec;
  rec.method = method;
  rec.conditioning = conditioning;
  rec.base = cfg.shell_project_start ? project_to_shell(base, d) : base;
  rec.age_base = oracle.age_of(rec.base);
  rec.base_bucket = bucket_of(rec.age_base, cfg.buckets);
  const FeatureVector f_base = oracle.identity_features(rec.base);

  const int count = cfg.buckets.count();
  const auto eligible = eligible_buckets(rec.base_bucket, count, conditioning);
  if (eligible.empty()) {
    rec.done_reason = DoneReason::success;
    return rec;
  }
  std::vector<bool> visited(static_cast<std::size_t>(count), false);
  visited[static_cast<std::size_t>(rec.base_bucket)] = true;
  std::vector<bool> reached(static_cast<std::size_t>(count), false);
  const Vector dir = signed_hyperplane(k, conditioning).values();

  rec.done_reason = DoneReason::timeout;
  for (int i = 1; i <= n_steps; ++i) {
    TrajectoryStep ts;
    ts.index = i;
    LatentVector s = rec.base + (static_cast<double>(i) * step_size) * dir;
    ts.age = oracle.age_of(s);
    ts.bucket = bucket_of(ts.age, cfg.buckets);
    ts.I_g = identity_distance(oracle.identity_features(s), f_base);
    ts.typicality_score = typicality_score(s, cfg.typical);
    const bool z = ts.typicality_score <= cfg.typical.epsilon;
    const bool mg = age_gate(ts.age, rec.age_base, ts.bucket, visited, conditioning);
    ts.reward = reward(ts.I_g, mg, z, cfg.rewards).reward;
    if (ts.reward > 0.0) visited[static_cast<std::size_t>(ts.bucket)] = true;
    if (beyond_base(ts.age, rec.age_base, conditioning) &&
        std::find(eligible.begin(), eligible.end(), ts.bucket) != eligible.end()) {
      reached[static_cast<std::size_t>(ts.bucket)] = true;
    }
    ts.latent = std::move(s);
    rec.steps.push_back(std::move(ts));
    const int n_reached = count_reached(reached);
    if (n_reached == static_cast<int>(eligible.size())) {
      rec.done_reason = DoneReason::success;
      break;
    }
    if (stop_after_buckets && n_reached >= *stop_after_buckets) break;
  }
  return rec;
}

std::vector<LatentVector> evaluation_bases(std::uint64_t seed, int count, int d) {
  if (count < 0) throw UsageError("evaluation_bases: negative count");
  std::vector<LatentVector> bases;
  bases.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    bases.push_back(sample_latent(derive_seed(seed, static_cast<std::uint64_t>(i)), d));
  }
  return bases;
}

std::string bases_hash(std::span<const LatentVector> bases) {
  std::string bytes;
  for (const auto& b : bases) {
    bytes.append(reinterpret_cast<const char*>(b.data()),
                 static_cast<std::size_t>(b.size()) * sizeof(double));
  }
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(bytes));
  return buf;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

ConfidenceInterval paired_bootstrap_mean_diff(std::span<const double> a, std::span<const double> b,
                                              int resamples, std::uint64_t seed, double level) {
  if (a.size() != b.size() || a.empty()) {
    throw UsageError("paired_bootstrap_mean_diff: samples must be non-empty and paired");
  }
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
    throw UsageError("paired_bootstrap_mean_diff: bad resamples or level");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  ConfidenceInterval ci;
  ci.estimate = summarize(diff).mean;
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) sum += diff[rng.index(diff.size())];
    m = sum / static_cast<double>(diff.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1)));
    return means[std::min(idx, means.size() - 1)];
  };
  ci.lo = at(tail);
  ci.hi = at(1.0 - tail);
  return ci;
}

namespace {

ComparisonRow make_row(const MethodResults& mr, std::optional<Conditioning> filter) {
  ComparisonRow row;
  row.method = mr.name;
  row.conditioning = filter ? std::string(to_string(*filter)) : "all";
  std::vector<double> cos;
  std::vector<double> cov;
  std::vector<double> viol;
  std::vector<double> ret;
  for (const auto& ep : mr.episodes) {
    if (filter && ep.conditioning != *filter) continue;
    cos.push_back(ep.metrics.identity_cosine_mean);
    cov.push_back(ep.metrics.bucket_coverage);
    viol.push_back(ep.metrics.typicality_violation_rate);
    ret.push_back(ep.metrics.episode_return);
  }
  const Summary c = summarize(cos);
  row.identity_cosine_mean = c.mean;
  row.identity_cosine_std = c.std;
  row.coverage_mean = summarize(cov).mean;
  row.violation_rate = summarize(viol).mean;
  row.return_mean = summarize(ret).mean;
  row.episodes = static_cast<std::int64_t>(cos.size());
  return row;
}

}  // namespace

Comparison compare(std::span<const MethodSpec> methods, std::span<const LatentVector> bases,
                   const EnvConfig& cfg, Oracle& oracle, std::uint64_t seed) {
  Comparison cmp;
  cmp.seed = seed;
  cmp.bases_hash = bases_hash(bases);
  std::map<std::string, std::size_t> index;
  for (const auto& spec : methods) {
    if (index.contains(spec.name)) throw UsageError("compare: duplicate method '" + spec.name + "'");
    if (spec.match_coverage_to && !index.contains(*spec.match_coverage_to)) {
      throw UsageError("compare: method '" + spec.name + "' matches coverage of unknown or later method '" +
                       *spec.match_coverage_to + "'");
    }
    if (spec.kind == MethodSpec::Kind::linear && !spec.direction) {
      throw UsageError("compare: linear method '" + spec.name + "' has no direction");
    }
    index[spec.name] = cmp.methods.size();
    cmp.methods.push_back(MethodResults{spec.name, {}});
  }

  const Conditioning order[2] = {Conditioning::ascending, Conditioning::descending};
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const MethodSpec& spec = methods[m];
        EpisodeResult ep;
        ep.base_index = static_cast<std::int64_t>(i);
        ep.conditioning = order[c];
        if (spec.kind == MethodSpec::Kind::policy) {
          // Common random numbers: every policy sees the same noise stream per episode.
          Rng rng(derive_seed(seed, 2 * i + static_cast<std::uint64_t>(c)));
          ep.trajectory =
              run_policy_episode(spec.policy, bases[i], order[c], cfg, oracle, rng, spec.mode, spec.name);
        } else {
          std::optional<int> stop;
          if (spec.match_coverage_to) {
            stop = cmp.methods[index.at(*spec.match_coverage_to)].episodes.back().metrics.buckets_reached;
          }
          ep.trajectory = run_linear_episode(bases[i], order[c], *spec.direction, spec.step_size,
                                             spec.n_steps, cfg, oracle, spec.name, stop);
        }
        ep.metrics = evaluate_trajectory(ep.trajectory, oracle, cfg);
        cmp.methods[m].episodes.push_back(std::move(ep));
      }
    }
  }
  for (const auto& mr : cmp.methods) {
    cmp.rows.push_back(make_row(mr, Conditioning::ascending));
    cmp.rows.push_back(make_row(mr, Conditioning::descending));
    cmp.rows.push_back(make_row(mr, std::nullopt));
  }
  return cmp;
}

const MethodResults& find_method(const Comparison& cmp, const std::string& name) {
  for (const auto& m : cmp.methods) {
    if (m.name == name) return m;
  }
  throw UsageError("comparison has no method '" + name + "'");
}

std::string comparison_csv(const Comparison& cmp) {
  std::ostringstream out;
  out << "method,conditioning,identity_cosine_mean,identity_cosine_std,coverage_mean,violation_rate,"
         "return_mean\n";
  char buf[512];
  for (const auto& r : cmp.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.method.c_str(),
                  r.conditioning.c_str(), r.identity_cosine_mean, r.identity_cosine_std, r.coverage_mean,
                  r.violation_rate, r.return_mean);
    out << buf;
  }
  return out.str();
}

nlohmann::json metrics_to_json(const MetricsReport& m) {
  return {{"bucket_coverage", m.bucket_coverage},
          {"buckets_reached", m.buckets_reached},
          {"eligible", m.eligible},
          {"identity_cosine_mean", m.identity_cosine_mean},
          {"identity_cosine_min", m.identity_cosine_min},
          {"bucket_cosine_mean", m.bucket_cosine_mean},
          {"identity_sqdist", m.identity_sqdist},
          {"final_identity_sqdist", m.final_identity_sqdist},
          {"typicality_violation_rate", m.typicality_violation_rate},
          {"episode_return", m.episode_return},
          {"steps", m.steps}};
}

nlohmann::json comparison_json(const Comparison& cmp, bool include_latents) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : cmp.rows) {
    rows.push_back({{"method", r.method},
                    {"conditioning", r.conditioning},
                    {"identity_cosine_mean", r.identity_cosine_mean},
                    {"identity_cosine_std", r.identity_cosine_std},
                    {"coverage_mean", r.coverage_mean},
                    {"violation_rate", r.violation_rate},
                    {"return_mean", r.return_mean},
                    {"episodes", r.episodes}});
  }
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& mr : cmp.methods) {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& ep : mr.episodes) {
      eps.push_back({{"base_index", ep.base_index},
                     {"conditioning", to_string(ep.conditioning)},
                     {"metrics", metrics_to_json(ep.metrics)},
                     {"trajectory", trajectory_to_json(ep.trajectory, include_latents)}});
    }
    methods[mr.name] = std::move(eps);
  }
  return {{"seed", cmp.seed}, {"bases_hash", cmp.bases_hash}, {"rows", std::move(rows)},
          {"episodes", std::move(methods)}};
}

}  // namespace latent_steer
