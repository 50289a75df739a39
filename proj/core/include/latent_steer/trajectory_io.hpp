#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "latent_steer/evaluation.hpp"

namespace latent_steer {

/// One JSON object per trajectory. Latents (base and per step) are written
/// only when `include_latents` is set.
nlohmann::json trajectory_to_json(const TrajectoryRecord& rec, bool include_latents);
TrajectoryRecord trajectory_from_json(const nlohmann::json& j);

/// Appends one line per record and flushes, so the file is valid JSONL after
/// every write.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& out, bool include_latents) : out_(out), latents_(include_latents) {}
  void write(const TrajectoryRecord& rec);

 private:
  std::ostream& out_;
  bool latents_;
};

void write_trajectory(std::ostream& out, std::span<const TrajectoryRecord> records, bool include_latents);

/// Reads a JSONL trajectory file. A malformed line raises PartialReadError
/// carrying the index of the last line that parsed.
std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path);

}  // namespace latent_steer
