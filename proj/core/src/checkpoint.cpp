#include "latent_steer/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <zlib.h>

#include "latent_steer/errors.hpp"

namespace latent_steer {

using nlohmann::json;

std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

namespace {

json tensor_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

json tensor_json(const Vector& v) {
  return {{"shape", {v.size()}}, {"data", std::vector<double>(v.data(), v.data() + v.size())}};
}

void put_mlp(json& tensors, const std::string& prefix, const Mlp& m) {
  tensors[prefix + ".W1"] = tensor_json(m.W1);
  tensors[prefix + ".b1"] = tensor_json(m.b1);
  tensors[prefix + ".W2"] = tensor_json(m.W2);
  tensors[prefix + ".b2"] = tensor_json(m.b2);
  tensors[prefix + ".W3"] = tensor_json(m.W3);
  tensors[prefix + ".b3"] = tensor_json(m.b3);
}

const json& find_tensor(const json& tensors, const std::string& name) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ChecksumError("checkpoint: missing tensor '" + name + "'");
  return *it;
}

Matrix get_matrix(const json& tensors, const std::string& name) {
  const json& t = find_tensor(tensors, name);
  const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = t.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(data.size())) {
    throw ChecksumError("checkpoint: tensor '" + name + "' has inconsistent shape");
  }
  return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
}

Vector get_vector(const json& tensors, const std::string& name) {
  const json& t = find_tensor(tensors, name);
  const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = t.at("data").get<std::vector<double>>();
  if (shape.size() != 1 || shape[0] != static_cast<Eigen::Index>(data.size())) {
    throw ChecksumError("checkpoint: tensor '" + name + "' has inconsistent shape");
  }
  return Eigen::Map<const Vector>(data.data(), shape[0]);
}

Mlp get_mlp(const json& tensors, const std::string& prefix) {
  Mlp m;
  m.W1 = get_matrix(tensors, prefix + ".W1");
  m.b1 = get_vector(tensors, prefix + ".b1");
  m.W2 = get_matrix(tensors, prefix + ".W2");
  m.b2 = get_vector(tensors, prefix + ".b2");
  m.W3 = get_matrix(tensors, prefix + ".W3");
  m.b3 = get_vector(tensors, prefix + ".b3");
  if (m.W1.rows() != m.b1.size() || m.W2.rows() != m.b2.size() || m.W3.rows() != m.b3.size() ||
      m.W2.cols() != m.W1.rows() || m.W3.cols() != m.W2.rows()) {
    throw ChecksumError("checkpoint: inconsistent layer shapes under '" + prefix + "'");
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json meta = {{"d", ckpt.meta.d},
               {"seed", ckpt.meta.seed},
               {"train_step", ckpt.meta.train_step},
               {"config_hash", ckpt.meta.config_hash},
               {"algo", ckpt.meta.algo},
               {"extra", ckpt.meta.extra}};
  json tensors = json::object();
  put_mlp(tensors, "policy", ckpt.policy.net);
  tensors["policy.log_std"] = tensor_json(ckpt.policy.log_std);
  put_mlp(tensors, "value", ckpt.value.net);
  if (ckpt.optimizer) {
    tensors["adam.policy.m"] = tensor_json(ckpt.optimizer->policy_m);
    tensors["adam.policy.v"] = tensor_json(ckpt.optimizer->policy_v);
    tensors["adam.value.m"] = tensor_json(ckpt.optimizer->value_m);
    tensors["adam.value.v"] = tensor_json(ckpt.optimizer->value_v);
    meta["adam_steps"] = ckpt.optimizer->steps;
  }
  json body = {{"meta", std::move(meta)}, {"tensors", std::move(tensors)}};
  const std::uint32_t checksum = crc32_of(body.dump());
  body["checksum"] = checksum;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("checkpoint: cannot write " + tmp.string());
    out << body.dump() << '\n';
    if (!out) throw Error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ChecksumError("checkpoint: cannot open " + path.string());
  std::stringstream raw;
  raw << in.rdbuf();

  json doc;
  try {
    doc = json::parse(raw.str());
  } catch (const json::exception& e) {
    throw ChecksumError("checkpoint: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
  try {
    const std::uint32_t stored = doc.at("checksum").get<std::uint32_t>();
    const json body = {{"meta", doc.at("meta")}, {"tensors", doc.at("tensors")}};
    if (crc32_of(body.dump()) != stored) {
      throw ChecksumError("checkpoint: checksum mismatch in " + path.string());
    }
    const json& meta = doc.at("meta");
    const json& tensors = doc.at("tensors");

    Checkpoint ckpt;
    ckpt.meta.d = meta.at("d").get<int>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.train_step = meta.at("train_step").get<std::int64_t>();
    ckpt.meta.config_hash = meta.at("config_hash").get<std::string>();
    ckpt.meta.algo = meta.value("algo", std::string());
    ckpt.meta.extra = meta.value("extra", json::object());
    ckpt.policy.net = get_mlp(tensors, "policy");
    ckpt.policy.log_std = get_vector(tensors, "policy.log_std");
    ckpt.value.net = get_mlp(tensors, "value");
    if (ckpt.policy.net.output_dim() != ckpt.policy.log_std.size() ||
        ckpt.policy.net.input_dim() != 3 * ckpt.meta.d || ckpt.policy.log_std.size() != ckpt.meta.d + 2) {
      throw ChecksumError("checkpoint: policy shapes disagree with meta.d");
    }
    if (tensors.contains("adam.policy.m")) {
      OptimizerSnapshot opt;
      opt.policy_m = get_vector(tensors, "adam.policy.m");
      opt.policy_v = get_vector(tensors, "adam.policy.v");
      opt.value_m = get_vector(tensors, "adam.value.m");
      opt.value_v = get_vector(tensors, "adam.value.v");
      opt.steps = meta.value("adam_steps", std::int64_t{0});
      ckpt.optimizer = std::move(opt);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ChecksumError("checkpoint: malformed structure in " + path.string() + " (" + e.what() + ")");
  }
}

}  // namespace latent_steer
