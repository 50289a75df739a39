// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Usage: latent_steer_acceptance [--quick]
//   --quick shrinks the training criteria (20k steps, one seed) for a smoke run;
//   the verdict lines are then marked as not representative.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "latent_steer/algorithms.hpp"
#include "latent_steer/baselines.hpp"
#include "latent_steer/checkpoint.hpp"
#include "latent_steer/config.hpp"
#include "latent_steer/environment.hpp"
#include "latent_steer/evaluation.hpp"
#include "latent_steer/gae.hpp"
#include "latent_steer/trainer.hpp"
#include "test_support.hpp"

using namespace latent_steer;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

void info(const std::string& text) {
  std::printf("      %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Tracks the worst absolute error over a set of hand-computed expectations.
struct Tally {
  double tol;
  double worst = 0.0;
  int checks = 0;
  int bad = 0;
  std::string first_bad;

  void near(double got, double want, const std::string& what) {
    const double err = std::abs(got - want);
    ++checks;
    worst = std::max(worst, err);
    if (!(err <= tol)) {
      ++bad;
      if (first_bad.empty()) first_bad = fmt("%s: got %.17g want %.17g", what.c_str(), got, want);
    }
  }
  void truth(bool ok, const std::string& what) { near(ok ? 1.0 : 0.0, 1.0, what); }
};

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Ones vector with the first entry adjusted so that ‖s‖² = sq exactly.
Vector with_sqnorm(int d, double sq) {
  Vector s = Vector::Ones(d);
  s[0] = std::sqrt(sq - (d - 1));
  return s;
}

RunConfig desk_config(std::uint64_t seed) {
  return load_config({.profile = std::string("desk"), .overrides = {"train.seed=" + std::to_string(seed)}});
}

// --- equation oracles -------------------------------------------------------

void equation_oracles() {
  Tally t{1e-9};
  const RewardConfig table;  // r 2, n 25, m 2, P1 750, P2 900

  // reward tuple under the default table
  t.near(reward(901.0, true, true, table).reward, -25.0, "reward I>P2");
  t.near(reward(700.0, true, true, table).reward, 4.0, "reward I<=P1");
  t.near(reward(800.0, true, true, table).reward, 2.0, "reward P1<I<=P2");
  t.near(reward(800.0, false, true, table).reward, -1.0, "reward no move");
  t.near(reward(10.0, true, false, table).reward, -25.0, "reward off shell");
  t.near(reward(750.0, true, true, table).reward, 4.0, "reward I=P1");
  t.near(reward(900.0, true, true, table).reward, 2.0, "reward I=P2");
  t.truth(reward(901.0, true, true, table).terminal && reward(1.0, true, false, table).terminal,
          "catastrophes terminate");
  t.truth(!reward(800.0, true, true, table).terminal && !reward(1.0, false, true, table).terminal,
          "other branches continue");

  // transition
  const auto e0 = DirectionVector::from_unit(vec({1, 0}));
  const ActionVector a{vec({0, 1}), 2.0, 3.0};
  const Vector up = transition(vec({1, 2}), a, signed_hyperplane(e0, Conditioning::ascending), 0.3);
  const Vector down = transition(vec({1, 2}), a, signed_hyperplane(e0, Conditioning::descending), 0.3);
  t.near(up[0], 2.4, "transition asc x");
  t.near(up[1], 4.1, "transition asc y");
  t.near(down[0], -0.4, "transition dsc x");
  t.near(down[1], 4.1, "transition dsc y");
  t.near((transition(vec({1, 2}), ActionVector{vec({5, 5}), 0.0, 0.0}, e0, 0.3) - vec({1, 2})).norm(), 0.0,
         "null action");

  // typicality
  const TypicalSetSpec shell{512, 3.0};
  t.near(typicality_score(with_sqnorm(512, 512), shell), 0.0, "typicality on shell");
  t.near(typicality_score(with_sqnorm(512, 520), shell), 4.0, "typicality 520");
  t.near(typicality_score(Vector::Zero(512), shell), 256.0, "typicality origin");
  t.truth(in_typical_set(with_sqnorm(512, 518), shell), "boundary 518 inside");
  t.truth(!in_typical_set(with_sqnorm(512, 518.5), shell), "518.5 outside");

  // buckets and the age gate
  const BucketSpec b;  // 20..60 by 5
  t.near(bucket_of(23.0, b), 0, "bucket 23");
  t.near(bucket_of(25.0, b), 1, "bucket 25");
  t.near(bucket_of(59.9, b), 7, "bucket 59.9");
  t.near(bucket_of(65.0, b), 7, "bucket 65 clamps");
  t.near(bucket_of(12.0, b), 0, "bucket 12 clamps");
  std::vector<bool> visited(8, false);
  visited[2] = true;
  t.truth(age_gate(36.0, 31.0, 3, visited, Conditioning::ascending), "gate asc new bucket");
  t.truth(!age_gate(31.0, 31.0, 2, visited, Conditioning::ascending), "gate tie");
  t.truth(!age_gate(33.0, 31.0, 2, visited, Conditioning::ascending), "gate visited bucket");
  t.truth(age_gate(24.0, 31.0, 0, visited, Conditioning::descending), "gate dsc");
  t.truth(!age_gate(36.0, 31.0, 3, visited, Conditioning::descending), "gate wrong direction");

  // identity distance
  t.near(identity_distance(vec({3, 4}), vec({0, 0})), 25.0, "identity (3,4)");
  t.near(identity_distance(vec({1, 1, 1}), vec({1, 1, 1})), 0.0, "identity self");

  // one full environment step on the desk oracle, recomputed by hand
  const RunConfig cfg = desk_config(0);
  Runtime rt = build_runtime(cfg);
  const SyntheticOracleSpec& spec = *rt.synthetic;
  const Vector k_age = spec.k_age.values();
  auto hand_age = [&](const Vector& s) { return std::clamp(spec.a * k_age.dot(s) + spec.b, spec.age_min, spec.age_max); };
  auto hand_features = [&](const Vector& s) { return Vector(s - k_age.dot(s) * k_age); };
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const Conditioning c = trial % 2 == 0 ? Conditioning::ascending : Conditioning::descending;
    const EpisodeState st = reset(make_goal(sample_latent(rng, 16), c), rt.env, *rt.oracle);
    if (st.done) continue;
    ActionVector act{sample_latent(rng, 16), 2.0 * rng.normal(), 2.0 * rng.normal()};
    const StepOutcome o = step(st, act, rt.env, *rt.oracle);

    const Vector k_hyp = (c == Conditioning::ascending ? 1.0 : -1.0) * rt.env.k_hyp.values();
    const Vector s1 = st.s + (1.0 - rt.env.T) * (act.w1 * k_hyp + act.w2 * act.k_gen / act.k_gen.norm());
    const double age0 = hand_age(st.s), age1 = hand_age(s1);
    const int bucket = std::clamp(static_cast<int>(std::floor((age1 - 20.0) / 5.0)), 0, 3);
    const bool moved = (c == Conditioning::ascending ? age1 > age0 : age1 < age0) &&
                       !st.visited[static_cast<std::size_t>(bucket)];
    const double I = (hand_features(s1) - hand_features(st.s)).squaredNorm();
    const bool typical = 0.5 * std::abs(16.0 - s1.squaredNorm()) <= rt.env.typical.epsilon;
    const RewardConfig& rc = rt.env.rewards;
    double want = -1.0;
    if (I > rc.P2 || !typical) want = -rc.n;
    else if (moved) want = I <= rc.P1 ? rc.m * rc.r : rc.r;

    t.near((o.next_state.s - s1).norm(), 0.0, "env step state");
    t.near(o.info.age, age1, "env step age");
    t.near(o.info.I_g, I, "env step I_g");
    t.near(o.reward, want, fmt("env step reward trial %d", trial));
  }

  verdict("equation-oracles", t.bad == 0,
          fmt("%d checks, max |err| %.2e (tol 1e-9)%s%s", t.checks, t.worst, t.bad ? "; first: " : "",
              t.first_bad.c_str()));
}

// --- gradients ----------------------------------------------------------------

void gradient_correctness() {
  Rng rng(2024);
  double worst = 0.0;
  std::string where;
  std::int64_t components = 0;
  const LossSpec specs[] = {{LossKind::policy_surrogate, SurrogateForm::clipped_ratio, 0.2},
                            {LossKind::policy_surrogate, SurrogateForm::log_prob},
                            {LossKind::value_mse},
                            {LossKind::entropy}};
  const char* names[] = {"clipped surrogate", "log-prob surrogate", "value mse", "entropy"};
  for (int net = 0; net < 20; ++net) {
    const MlpParams p = oracle_ref::random_policy(4, rng);
    const ValueParams v = oracle_ref::random_value(4, rng);
    const PolicyBatch batch = oracle_ref::random_batch(p, 8, rng);
    for (int s = 0; s < 4; ++s) {
      const oracle_ref::FdReport r = oracle_ref::finite_difference_check(p, v, batch, specs[s]);
      components += r.components;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = fmt("net %d, %s, %s", net, names[s], r.worst.c_str());
      }
    }
  }
  verdict("gradient-correctness", worst < 1e-4,
          fmt("20 nets (d=4) x 4 losses, %lld components, max rel err %.2e at %s (tol 1e-4)",
              static_cast<long long>(components), worst, where.c_str()));
}

// --- GAE ------------------------------------------------------------------------

void gae_equivalence() {
  Rng rng(77);
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int T = 1 + static_cast<int>(rng.index(32));
    Vector r(T), v(T), done(T);
    for (int i = 0; i < T; ++i) {
      r[i] = 3.0 * rng.normal();
      v[i] = 3.0 * rng.normal();
      done[i] = rng.uniform() < 0.15 ? 1.0 : 0.0;
    }
    const double last = rng.normal();
    const double gamma = rng.uniform(), lambda = rng.uniform();
    const AdvantageEstimate got = gae(r, v, done, last, gamma, lambda);
    const AdvantageEstimate want = oracle_ref::brute_force_gae(r, v, done, last, gamma, lambda);
    worst = std::max({worst, (got.advantages - want.advantages).cwiseAbs().maxCoeff(),
                      (got.returns - want.returns).cwiseAbs().maxCoeff()});
  }
  verdict("gae-equivalence", worst <= 1e-10,
          fmt("1000 instances (T<=32) vs O(T^2) definition, max |err| %.2e (tol 1e-10)", worst));
}

// --- shell exit -----------------------------------------------------------------

void shell_exit() {
  Rng rng(5);
  int cases = 0, agree = 0;
  std::string first_bad;
  for (int d : {16, 512}) {
    const TypicalSetSpec spec{d, d == 16 ? 1.5 : 3.0};
    for (int c = 0; c < 50; ++c) {
      const Vector s = project_to_shell(sample_latent(rng, d), d);
      DirectionVector k = unit_normalize(sample_latent(rng, d));
      if (s.dot(k.values()) < 0.0) k = -k;
      const double step = 0.02 + 0.5 * rng.uniform();
      const std::int64_t predicted = shell_exit_index(s, k, step, spec);
      // the walk itself, point by point
      const auto walk = linear_traversal(s, k, step, static_cast<int>(predicted) + 5);
      std::int64_t observed = -1;
      for (std::size_t i = 0; i < walk.size(); ++i) {
        if (!in_typical_set(walk[i], spec)) {
          observed = static_cast<std::int64_t>(i) + 1;
          break;
        }
      }
      ++cases;
      if (observed == predicted) ++agree;
      else if (first_bad.empty()) first_bad = fmt("; d=%d predicted %lld observed %lld", d, (long long)predicted, (long long)observed);
    }
  }
  verdict("shell-exit", agree == cases, fmt("%d/%d walks exit at the closed-form index (d in {16, 512})%s", agree, cases, first_bad.c_str()));
}

// --- hyperplane recovery --------------------------------------------------------

void hyperplane_recovery() {
  const RunConfig cfg = desk_config(0);
  Runtime rt = build_runtime(cfg);
  const Vector k_age = rt.synthetic->k_age.values();
  const double mid = 0.5 * (rt.env.buckets.lo + rt.env.buckets.hi);

  Rng rng(31);
  std::vector<LatentVector> xs;
  std::vector<int> ys;
  for (int i = 0; i < 1000; ++i) {
    LatentVector s = sample_latent(rng, 16);
    ys.push_back(rt.oracle->age_of(s) >= mid ? 1 : 0);
    xs.push_back(std::move(s));
  }
  const double fit_cos = fit_hyperplane(xs, ys).values().dot(k_age);

  auto centroid_cos = [&](ClusterSplit split) {
    const AgeClusters c = sample_age_clusters(*rt.oracle, rt.env.buckets, split, 32, 1234);
    return centroid_direction(c.young, c.old).values().dot(k_age);
  };
  const double cen = centroid_cos(ClusterSplit::extreme_buckets);
  const double cen_mid = centroid_cos(ClusterSplit::midpoint);

  verdict("hyperplane-fit", fit_cos >= 0.99, fmt("1000 latents (d=16), cosine to k_age %.4f (need >= 0.99)", fit_cos));
  verdict("hyperplane-centroid", cen >= 0.95,
          fmt("32+32 extreme-bucket clusters, cosine to k_age %.4f (need >= 0.95)", cen));
  info(fmt("midpoint split for reference: cosine %.4f", cen_mid));
}

// --- training efficacy and identity ordering ----------------------------------

struct TrainedRun {
  std::uint64_t seed = 0;
  MlpParams policy;
};

double mean_return(const MlpParams& policy, const std::vector<LatentVector>& bases, const RunConfig& cfg,
                   Runtime& rt) {
  double total = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const Conditioning c = i % 2 == 0 ? Conditioning::ascending : Conditioning::descending;
    Rng rng(derive_seed(cfg.eval.seed, 0xACC0 + i));
    total += run_policy_episode(policy, bases[i], c, rt.env, *rt.oracle, rng, ActionMode::stochastic, "x")
                 .episode_return();
  }
  return total / static_cast<double>(bases.size());
}

std::vector<TrainedRun> training_efficacy(bool quick) {
  const std::vector<std::uint64_t> seeds = quick ? std::vector<std::uint64_t>{0} : std::vector<std::uint64_t>{0, 1, 2};
  const std::int64_t steps = quick ? 20'000 : 200'000;
  std::vector<TrainedRun> runs;
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = desk_config(seed);
    cfg.train.total_steps = steps;
    Runtime rt = build_runtime(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const RunArtifacts art = train(cfg.train, rt.env, *rt.oracle);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const int d = rt.env.d();
    MlpParams random;
    random.net = Mlp::zeros(3 * d, kHiddenWidth, d + 2);
    random.log_std = Vector::Zero(d + 2);

    const auto bases = evaluation_bases(cfg.eval.seed, 100, d);
    const double trained = mean_return(art.learner.policy, bases, cfg, rt);
    const double rand = mean_return(random, bases, cfg, rt);
    // upper bound m·r per eligible bucket, with the literal count of 4
    const double bound = cfg.env.rewards.m * cfg.env.rewards.r * 4.0;
    const double frac = (trained - rand) / (bound - rand);
    const bool pass = frac >= 0.5;
    all = all && pass;
    info(fmt("seed %llu: %lld steps in %.0fs, trained %.2f, random %.2f, bound %.0f, gap closed %.1f%%",
             static_cast<unsigned long long>(seed), static_cast<long long>(art.env_steps), secs, trained, rand,
             bound, 100.0 * frac));
    detail += fmt("%sseed %llu %.0f%%", detail.empty() ? "" : ", ", static_cast<unsigned long long>(seed), 100.0 * frac);
    runs.push_back({seed, art.learner.policy});
  }
  verdict("training-efficacy", all,
          fmt("%s of gap to bound closed over 100 eval episodes (need >= 50%% each)%s", detail.c_str(),
              quick ? " [quick mode]" : ""));
  return runs;
}

std::vector<double> per_episode(const MethodResults& m, double MetricsReport::*field) {
  std::vector<double> out;
  for (const auto& e : m.episodes) out.push_back(e.metrics.*field);
  return out;
}

void identity_ordering(const std::vector<TrainedRun>& runs, bool quick) {
  bool cos_all = true, vio_all = true;
  std::string cos_detail, vio_detail;
  for (const TrainedRun& run : runs) {
    const RunConfig cfg = desk_config(run.seed);
    Runtime rt = build_runtime(cfg);
    const int d = rt.env.d();

    std::vector<MethodSpec> methods(3);
    methods[0].name = "policy";
    methods[0].policy = run.policy;
    methods[1].name = "untrained";
    methods[1].policy = LearnerState::initialize(d, cfg.train).policy;
    methods[2].name = "linear";
    methods[2].kind = MethodSpec::Kind::linear;
    methods[2].direction = rt.env.k_hyp;
    methods[2].step_size = cfg.eval.linear_step_size;
    methods[2].n_steps = cfg.eval.linear_n_steps;
    methods[2].match_coverage_to = "policy";

    const auto bases = evaluation_bases(cfg.eval.seed, quick ? 60 : 300, d);
    const Comparison cmp = compare(methods, bases, rt.env, *rt.oracle, cfg.eval.seed);
    const auto& pol = find_method(cmp, "policy");
    const auto& lin = find_method(cmp, "linear");
    const auto& unt = find_method(cmp, "untrained");
    const auto boot = derive_seed(cfg.eval.seed, 0xB007);
    const auto dc = paired_bootstrap_mean_diff(per_episode(pol, &MetricsReport::identity_cosine_mean),
                                               per_episode(lin, &MetricsReport::identity_cosine_mean),
                                               cfg.eval.bootstrap_resamples, boot);
    const auto dv = paired_bootstrap_mean_diff(per_episode(unt, &MetricsReport::typicality_violation_rate),
                                               per_episode(pol, &MetricsReport::typicality_violation_rate),
                                               cfg.eval.bootstrap_resamples, boot + 1);
    const auto mean_of = [](const std::vector<double>& v) {
      return summarize(v).mean;
    };
    info(fmt("seed %llu: cosine policy %.4f vs linear %.4f; coverage policy %.3f vs linear %.3f; "
             "violation untrained %.3f vs policy %.3f",
             static_cast<unsigned long long>(run.seed), mean_of(per_episode(pol, &MetricsReport::identity_cosine_mean)),
             mean_of(per_episode(lin, &MetricsReport::identity_cosine_mean)),
             mean_of(per_episode(pol, &MetricsReport::bucket_coverage)),
             mean_of(per_episode(lin, &MetricsReport::bucket_coverage)),
             mean_of(per_episode(unt, &MetricsReport::typicality_violation_rate)),
             mean_of(per_episode(pol, &MetricsReport::typicality_violation_rate))));
    cos_all = cos_all && dc.lo > 0.0;
    vio_all = vio_all && dv.lo > 0.0;
    cos_detail += fmt("%sseed %llu %+.4f [%+.4f, %+.4f]", cos_detail.empty() ? "" : ", ",
                      static_cast<unsigned long long>(run.seed), dc.estimate, dc.lo, dc.hi);
    vio_detail += fmt("%sseed %llu %+.3f [%+.3f, %+.3f]", vio_detail.empty() ? "" : ", ",
                      static_cast<unsigned long long>(run.seed), dv.estimate, dv.lo, dv.hi);
  }
  const std::string n = quick ? "60 bases x 2 conditionings [quick mode]" : "300 bases x 2 conditionings";
  verdict("identity-vs-linear", cos_all, "cosine policy - linear, 95% CI: " + cos_detail + "; " + n);
  verdict("violation-vs-untrained", vio_all, "violation untrained - policy, 95% CI: " + vio_detail + "; " + n);
}

// --- determinism ----------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "latent_steer_acceptance";
  fs::remove_all(root);
  RunConfig cfg = desk_config(11);
  cfg.train.total_steps = 8192;
  std::string logs[2];
  Checkpoint ck;
  for (int i = 0; i < 2; ++i) {
    Runtime rt = build_runtime(cfg);
    TrainOutputs outs;
    outs.run_dir = root / ("run" + std::to_string(i));
    outs.config_hash = config_hash(cfg);
    const RunArtifacts art = train(cfg.train, rt.env, *rt.oracle, outs);
    logs[i] = slurp(art.metrics_path);
    if (i == 0) ck = make_checkpoint(art.learner, cfg.train, rt.env.d(), art.env_steps, outs.config_hash);
  }
  const bool same_logs = !logs[0].empty() && logs[0] == logs[1];
  verdict("determinism-metrics", same_logs,
          fmt("two runs, same seed and config: metrics.jsonl %zu vs %zu bytes, %s", logs[0].size(), logs[1].size(),
              same_logs ? "identical" : "different"));

  const fs::path path = root / "roundtrip.json";
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  Rng rng(9);
  int mismatches = 0;
  const int d = ck.policy.d();
  for (int i = 0; i < 256; ++i) {
    Vector x(3 * d);
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.normal();
    const Vector a = forward_policy(ck.policy, x), b = forward_policy(back.policy, x);
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) ++mismatches;
    const double va = forward_value(ck.value, x), vb = forward_value(back.value, x);
    if (std::memcmp(&va, &vb, sizeof va) != 0) ++mismatches;
  }
  const bool same_std = ck.policy.log_std == back.policy.log_std;
  verdict("checkpoint-roundtrip", mismatches == 0 && same_std,
          fmt("256 random inputs, %d forward outputs differ bitwise after save/load", mismatches));
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") quick = true;
    else {
      std::fprintf(stderr, "usage: %s [--quick]\n", argv[0]);
      return 2;
    }
  }
  try {
    equation_oracles();
    gradient_correctness();
    gae_equivalence();
    shell_exit();
    hyperplane_recovery();
    determinism();
    const auto runs = training_efficacy(quick);
    identity_ordering(runs, quick);
  } catch (const std::exception& e) {
    std::printf("FAIL  %-28s %s\n", "uncaught-error", e.what());
    return 1;
  }
  std::printf("%s: %d criterion line(s) failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
