#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace latent_steer {

/// Deterministic random stream used everywhere in the library.
///
/// Uniforms come from std::mt19937_64 (whose output sequence is fixed by the
/// C++ standard) converted with the top 53 bits. Normal variates use the
/// Box-Muller transform, emitting the cosine branch first and caching the
/// sine branch for the next call. Library-provided distributions are avoided
/// because their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();

  /// Standard normal.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Serialized engine state, for resumable runs.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// SplitMix64 mix of (base, stream); used to derive independent sub-streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace latent_steer
