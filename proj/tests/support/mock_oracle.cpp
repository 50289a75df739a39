#include "mock_oracle.hpp"

#include <unistd.h>

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mock_oracle {
namespace {

using nlohmann::json;

class Io {
 public:
  Io(int in_fd, int out_fd) : in_(in_fd), out_(out_fd) {}

  bool read_line(std::string& line) {
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::read(in_, chunk, sizeof chunk);
      if (n <= 0) return false;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(out_, data.data() + off, data.size() - off);
      if (n <= 0) return;
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  int in_;
  int out_;
  std::string buf_;
};

double age(const std::vector<double>& s) { return 4.0 * s.at(0) + 40.0; }

std::vector<double> identity(std::vector<double> s) {
  s.at(0) = 0.0;
  return s;
}

json answer(const json& req, int d) {
  json resp = {{"id", req.value("id", -1)}};
  const std::string op = req.value("op", "");
  auto bad_latent = [d](const json& l) { return !l.is_array() || static_cast<int>(l.size()) != d; };
  if (op == "age" || op == "identity") {
    if (req.contains("latents")) {
      json out = json::array();
      for (const auto& l : req["latents"]) {
        if (bad_latent(l)) return {{"id", resp["id"]}, {"ok", false}, {"error", "bad_latent"}};
        const auto s = l.get<std::vector<double>>();
        if (op == "age") out.push_back(age(s));
        else out.push_back(identity(s));
      }
      resp["ok"] = true;
      resp[op == "age" ? "values" : "features"] = out;
    } else {
      if (!req.contains("latent") || bad_latent(req["latent"])) {
        return {{"id", resp["id"]}, {"ok", false}, {"error", "bad_latent"}};
      }
      const auto s = req["latent"].get<std::vector<double>>();
      resp["ok"] = true;
      if (op == "age") resp["value"] = age(s);
      else resp["features"] = identity(s);
    }
    return resp;
  }
  resp["ok"] = false;
  resp["error"] = "unsupported_op";
  return resp;
}

}  // namespace

void serve(int in_fd, int out_fd, const Options& options) {
  Io io(in_fd, out_fd);
  json hs = {{"protocol", options.mode == "bad_proto" ? "other/9" : "latent-oracle/1"},
             {"d", options.d},
             {"feature_dim", options.d},
             {"ops", {"age", "identity"}}};
  io.write_line(hs.dump());
  std::string line;
  std::vector<json> pending;
  while (io.read_line(line)) {
    if (options.mode == "silent") continue;
    if (options.mode == "close") return;
    if (options.mode == "malformed") {
      io.write_line("{not json");
      continue;
    }
    json req;
    try {
      req = json::parse(line);
    } catch (const json::parse_error&) {
      io.write_line(json{{"ok", false}, {"error", "bad_request"}}.dump());
      continue;
    }
    if (options.mode == "unknown_id") {
      json resp = answer(req, options.d);
      resp["id"] = 999999;
      io.write_line(resp.dump());
      continue;
    }
    if (options.mode == "swap") {
      pending.push_back(req);
      if (pending.size() == 2) {
        io.write_line(answer(pending[1], options.d).dump());
        io.write_line(answer(pending[0], options.d).dump());
        pending.clear();
      }
      continue;
    }
    io.write_line(answer(req, options.d).dump());
  }
}

}  // namespace mock_oracle
