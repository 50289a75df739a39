#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "latent_steer/geometry.hpp"
#include "latent_steer/oracle.hpp"

namespace latent_steer {

enum class Conditioning { ascending, descending };

std::string_view to_string(Conditioning c);
Conditioning conditioning_from_string(std::string_view name);  // "asc"/"ascending"/"dsc"/"descending"
Conditioning flipped(Conditioning c);

/// Base latent plus the constant conditioning vector (1s ascending, 0s descending).
struct Goal {
  LatentVector base;
  Conditioning conditioning = Conditioning::ascending;
  Vector C;
};

Goal make_goal(const LatentVector& base, Conditioning conditioning);

/// +k_hyp for ascending, −k_hyp for descending.
DirectionVector signed_hyperplane(const DirectionVector& k_hyp, Conditioning conditioning);

/// Policy output [k_gen, w1, w2], length d + 2.
struct ActionVector {
  Vector k_gen;
  double w1 = 0.0;
  double w2 = 0.0;

  static ActionVector from_flat(const Vector& flat);
  Vector flat() const;
};

/// Locally linear step: s + (1 − T)·(w1·k_hyp_g + w2·k_gen).
LatentVector transition(const LatentVector& s, const ActionVector& a, const DirectionVector& k_hyp_g,
                        double T);

/// Equal-width half-open age buckets [lo + iB, lo + (i+1)B).
struct BucketSpec {
  double lo = 20.0;
  double hi = 60.0;
  double width = 5.0;

  int count() const;
  void validate() const;
};

/// Bucket index with out-of-range ages clamped into the edge buckets.
int bucket_of(double age, const BucketSpec& spec);

/// Buckets strictly beyond `base_bucket` in the conditioning direction.
std::vector<int> eligible_buckets(int base_bucket, int bucket_count, Conditioning conditioning);

/// Reward qualification M_g: strict age progress into an unvisited bucket.
/// `visited` is indexed by bucket.
bool age_gate(double age_t, double age_base, int bucket, const std::vector<bool>& visited,
              Conditioning conditioning);

/// Squared Euclidean distance I_g.
double identity_distance(const FeatureVector& f_t, const FeatureVector& f_base);

struct RewardConfig {
  double r = 2.0;
  double n = 25.0;
  double m = 2.0;
  double P1 = 750.0;
  double P2 = 900.0;

  void validate() const;
};

struct RewardOutcome {
  double reward = 0.0;
  bool terminal = false;
};

/// Four-branch reward, evaluated in order:
///   I_g > P2 or outside the typical set  → (−n, terminal)
///   I_g ≤ P1, qualifies, typical          → (m·r)
///   P1 < I_g ≤ P2, qualifies, typical     → (r)
///   otherwise                              → (−1)
RewardOutcome reward(double I_g, bool M_g, bool Z_g, const RewardConfig& cfg);

struct EnvConfig {
  double T = 0.3;
  int episode_length = 60;
  TypicalSetSpec typical;
  BucketSpec buckets;
  RewardConfig rewards;
  DirectionVector k_hyp = DirectionVector::from_unit(Vector::Unit(512, 0));
  bool shell_project_start = true;
  bool check_typicality_on_start = false;
  /// Use unit(k_gen) and read w2 as the step magnitude.
  bool normalize_k_gen = false;

  int d() const { return typical.d; }
  void validate() const;
};

enum class DoneReason { running, success, catastrophe_identity, catastrophe_typicality, timeout };

std::string_view to_string(DoneReason r);
DoneReason done_reason_from_string(std::string_view name);

struct EpisodeState {
  LatentVector s;
  int t = 0;
  std::vector<bool> visited;
  double age_base = 0.0;
  int base_bucket = 0;
  FeatureVector F_base;
  Goal goal;
  bool done = false;
  DoneReason done_reason = DoneReason::running;

  int visited_count() const;
};

struct StepInfo {
  double age = 0.0;
  int bucket = 0;
  double I_g = 0.0;
  bool Z_g = true;
  bool M_g = false;
  double typicality_score = 0.0;
};

struct StepOutcome {
  EpisodeState next_state;
  double reward = 0.0;
  StepInfo info;
};

/// Starts an episode at the goal's base latent.
///
/// The base bucket is pre-marked visited. If no bucket lies beyond it in the
/// conditioning direction the episode is already complete (done, success,
/// zero steps). With `check_typicality_on_start` a start outside the typical
/// set is reported as a finished typicality catastrophe.
EpisodeState reset(const Goal& goal, const EnvConfig& cfg, Oracle& oracle);

/// Advances one transition. Throws UsageError on a finished episode.
StepOutcome step(const EpisodeState& state, const ActionVector& a, const EnvConfig& cfg,
                 Oracle& oracle);

/// True once every eligible bucket has been visited.
bool all_eligible_visited(const EpisodeState& state, const BucketSpec& spec);

}  // namespace latent_steer
