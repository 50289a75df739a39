#include "latent_steer/trajectory_io.hpp"

#include <fstream>
#include <limits>
#include <string>

#include "latent_steer/errors.hpp"

namespace latent_steer {
namespace {

nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json trajectory_to_json(const TrajectoryRecord& rec, bool include_latents) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : rec.steps) {
    nlohmann::json js = {{"t", s.index},
                         {"age", s.age},
                         {"bucket", s.bucket},
                         {"I_g", s.I_g},
                         {"typicality_score", s.typicality_score},
                         {"reward", s.reward}};
    if (include_latents && s.latent) js["latent"] = vector_json(*s.latent);
    steps.push_back(std::move(js));
  }
  nlohmann::json j = {{"method", rec.method},
                      {"episode", rec.episode},
                      {"conditioning", to_string(rec.conditioning)},
                      {"age_base", rec.age_base},
                      {"base_bucket", rec.base_bucket},
                      {"done_reason", to_string(rec.done_reason)},
                      {"steps", std::move(steps)}};
  if (include_latents) j["base"] = vector_json(rec.base);
  return j;
}

TrajectoryRecord trajectory_from_json(const nlohmann::json& j) {
  TrajectoryRecord rec;
  rec.method = j.at("method").get<std::string>();
  rec.episode = j.at("episode").get<std::int64_t>();
  rec.conditioning = conditioning_from_string(j.at("conditioning").get<std::string>());
  rec.age_base = j.at("age_base").get<double>();
  rec.base_bucket = j.at("base_bucket").get<int>();
  rec.done_reason = done_reason_from_string(j.at("done_reason").get<std::string>());
  if (j.contains("base")) rec.base = vector_from(j.at("base"));
  int last = 0;
  for (const auto& js : j.at("steps")) {
    TrajectoryStep s;
    s.index = js.at("t").get<int>();
    if (s.index <= last) throw Error("trajectory step indices must increase");
    last = s.index;
    s.age = js.at("age").get<double>();
    s.bucket = js.at("bucket").get<int>();
    s.I_g = js.at("I_g").get<double>();
    s.typicality_score = js.at("typicality_score").get<double>();
    s.reward = js.at("reward").get<double>();
    if (js.contains("latent")) s.latent = vector_from(js.at("latent"));
    rec.steps.push_back(std::move(s));
  }
  return rec;
}

void TrajectoryWriter::write(const TrajectoryRecord& rec) {
  out_ << trajectory_to_json(rec, latents_).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("trajectory write failed");
}

void write_trajectory(std::ostream& out, std::span<const TrajectoryRecord> records, bool include_latents) {
  TrajectoryWriter writer(out, include_latents);
  for (const auto& r : records) writer.write(r);
}

std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file " + path.string());
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    try {
      out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw PartialReadError(index == 0 ? none : index - 1,
                             path.string() + ": line " + std::to_string(index + 1) + ": " + e.what());
    }
    ++index;
  }
  return out;
}

}  // namespace latent_steer
