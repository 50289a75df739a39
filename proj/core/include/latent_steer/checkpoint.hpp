#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "latent_steer/optimizer.hpp"
#include "latent_steer/policy.hpp"

namespace latent_steer {

struct CheckpointMeta {
  int d = 0;
  std::uint64_t seed = 0;
  std::int64_t train_step = 0;
  std::string config_hash;
  std::string algo;
  /// Free-form extras (episode counters, rng states, ...).
  nlohmann::json extra = nlohmann::json::object();
};

struct OptimizerSnapshot {
  Vector policy_m, policy_v;
  Vector value_m, value_v;
  std::int64_t steps = 0;
};

struct Checkpoint {
  MlpParams policy;
  ValueParams value;
  CheckpointMeta meta;
  std::optional<OptimizerSnapshot> optimizer;
};

/// Single JSON document:
///   {"meta": {...}, "tensors": {name: {"shape": [...], "data": [...]}}, "checksum": crc32}
/// The checksum covers the compact dump of {"meta", "tensors"}. Doubles are
/// written with round-trip precision, so a reload is bit-identical.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws ChecksumError on unreadable, malformed or tampered files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CRC-32 (zlib polynomial) of a byte string.
std::uint32_t crc32_of(const std::string& bytes);

}  // namespace latent_steer
