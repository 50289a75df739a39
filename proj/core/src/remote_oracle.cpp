#include "latent_steer/remote_oracle.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <map>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "latent_steer/errors.hpp"

namespace latent_steer {

using nlohmann::json;

Endpoint Endpoint::parse(const std::string& uri) {
  Endpoint ep;
  if (uri.rfind("stdio:", 0) == 0) {
    ep.kind = Kind::stdio;
    ep.command = uri.substr(6);
    if (ep.command.empty()) throw UsageError("endpoint: stdio: needs a command");
    return ep;
  }
  if (uri.rfind("tcp://", 0) == 0) {
    const std::string rest = uri.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw UsageError("endpoint: expected tcp://host:port, got " + uri);
    }
    ep.kind = Kind::tcp;
    ep.host = rest.substr(0, colon);
    try {
      ep.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("endpoint: bad port in " + uri);
    }
    if (ep.port <= 0 || ep.port > 65535) throw UsageError("endpoint: port out of range in " + uri);
    return ep;
  }
  throw UsageError("endpoint: unsupported scheme in '" + uri + "' (use stdio: or tcp://)");
}

std::string Endpoint::uri() const {
  if (kind == Kind::stdio) return "stdio:" + command;
  return "tcp://" + host + ":" + std::to_string(port);
}

bool Handshake::supports(const std::string& op) const {
  for (const auto& o : ops) {
    if (o == op) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<LineChannel> spawn(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0) throw TransportError("connect", std::strerror(errno));
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    throw TransportError("connect", std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) throw TransportError("connect", std::strerror(errno));
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  return std::make_unique<LineChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw TransportError("connect", gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    close(fd);
    fd = -1;
  }
  freeaddrinfo(found);
  if (fd < 0) throw TransportError("connect", "cannot reach " + host + ":" + service);
  const int write_fd = dup(fd);
  return std::make_unique<LineChannel>(fd, write_fd);
}

}  // namespace

std::unique_ptr<LineChannel> LineChannel::open(const Endpoint& endpoint) {
  // A server that dies mid-write must surface as an error, not kill us.
  std::signal(SIGPIPE, SIG_IGN);
  if (endpoint.kind == Endpoint::Kind::stdio) return spawn(endpoint.command);
  return connect_tcp(endpoint.host, endpoint.port);
}

LineChannel::LineChannel(int read_fd, int write_fd, int child_pid)
    : read_fd_(read_fd), write_fd_(write_fd), child_pid_(child_pid) {}

LineChannel::~LineChannel() {
  if (write_fd_ >= 0) close(write_fd_);
  if (read_fd_ >= 0) close(read_fd_);
  if (child_pid_ > 0) {
    int status = 0;
    // Closing stdin asks the server to exit; give it a moment, then insist.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(child_pid_, &status, WNOHANG) == child_pid_) return;
      usleep(10'000);
    }
    kill(child_pid_, SIGTERM);
    waitpid(child_pid_, &status, 0);
  }
}

void LineChannel::write_line(const std::string& line) {
  std::string data = line;
  data.push_back('\n');
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("closed", std::string("write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
}

std::string LineChannel::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw TransportError("timeout", "no response within deadline");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("closed", std::strerror(errno));
    }
    if (rc == 0) throw TransportError("timeout", "no response within deadline");
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("closed", std::strerror(errno));
    }
    if (n == 0) throw TransportError("closed", "server closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------

RemoteOracle::RemoteOracle(const std::string& uri, std::chrono::milliseconds timeout)
    : RemoteOracle(LineChannel::open(Endpoint::parse(uri)), timeout, "remote(" + uri + ")") {}

RemoteOracle::RemoteOracle(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout,
                           std::string description)
    : channel_(std::move(channel)), timeout_(timeout), description_(std::move(description)) {
  read_handshake();
}

namespace {

json parse_line(const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw TransportError("malformed_json", "expected a JSON object: " + line);
    return j;
  } catch (const json::parse_error& e) {
    throw TransportError("malformed_json", e.what());
  }
}

std::vector<double> to_doubles(const json& arr, const char* field) {
  if (!arr.is_array()) throw TransportError("protocol", std::string("'") + field + "' is not an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw TransportError("protocol", std::string("non-numeric entry in '") + field + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

FeatureVector to_feature(const json& arr) {
  const auto values = to_doubles(arr, "features");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json latent_json(const LatentVector& s) {
  return json(std::vector<double>(s.data(), s.data() + s.size()));
}

}  // namespace

void RemoteOracle::read_handshake() {
  const json hello = parse_line(channel_->read_line(timeout_));
  try {
    handshake_.protocol = hello.at("protocol").get<std::string>();
    handshake_.d = hello.at("d").get<int>();
    handshake_.feature_dim = hello.at("feature_dim").get<int>();
    handshake_.ops = hello.at("ops").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw TransportError("protocol", std::string("bad handshake: ") + e.what());
  }
  if (handshake_.protocol != kOracleProtocol) {
    throw TransportError("protocol", "unsupported protocol '" + handshake_.protocol + "'");
  }
  if (handshake_.d < 1 || handshake_.feature_dim < 1) {
    throw TransportError("protocol", "handshake advertises non-positive dimensions");
  }
}

json RemoteOracle::call(json request) {
  std::vector<json> one;
  one.push_back(std::move(request));
  return std::move(call_many(std::move(one)).front());
}

std::vector<json> RemoteOracle::call_many(std::vector<json> requests) {
  std::map<std::int64_t, std::size_t> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const std::int64_t id = next_id_++;
    requests[i]["id"] = id;
    pending.emplace(id, i);
    channel_->write_line(requests[i].dump());
  }
  std::vector<json> responses(requests.size());
  while (!pending.empty()) {
    json response = parse_line(channel_->read_line(timeout_));
    const auto ok = response.find("ok");
    if (ok == response.end() || !ok->is_boolean()) {
      throw TransportError("protocol", "response lacks boolean 'ok': " + response.dump());
    }
    if (!ok->get<bool>()) {
      const auto err = response.find("error");
      throw TransportError("server_error",
                           err != response.end() && err->is_string() ? err->get<std::string>()
                                                                     : std::string("unspecified"));
    }
    const auto id_it = response.find("id");
    if (id_it == response.end() || !id_it->is_number_integer()) {
      throw TransportError("protocol", "response lacks integer 'id'");
    }
    const auto match = pending.find(id_it->get<std::int64_t>());
    if (match == pending.end()) {
      throw TransportError("protocol", "response id " + id_it->dump() + " matches no request");
    }
    responses[match->second] = std::move(response);
    pending.erase(match);
  }
  return responses;
}

void RemoteOracle::check_latent(const LatentVector& s) const {
  if (s.size() != handshake_.d) {
    throw DimensionError("remote oracle: latent has length " + std::to_string(s.size()) +
                         ", server expects " + std::to_string(handshake_.d));
  }
}

double RemoteOracle::age_of(const LatentVector& s) {
  check_latent(s);
  const json r = call({{"op", "age"}, {"latent", latent_json(s)}});
  const auto v = r.find("value");
  if (v == r.end() || !v->is_number()) throw TransportError("protocol", "age response lacks 'value'");
  return v->get<double>();
}

FeatureVector RemoteOracle::identity_features(const LatentVector& s) {
  check_latent(s);
  const json r = call({{"op", "identity"}, {"latent", latent_json(s)}});
  const auto f = r.find("features");
  if (f == r.end()) throw TransportError("protocol", "identity response lacks 'features'");
  FeatureVector out = to_feature(*f);
  if (out.size() != handshake_.feature_dim) {
    throw TransportError("protocol", "feature length differs from handshake feature_dim");
  }
  return out;
}

std::vector<double> RemoteOracle::ages_of(std::span<const LatentVector> latents) {
  json batch = json::array();
  for (const auto& s : latents) {
    check_latent(s);
    batch.push_back(latent_json(s));
  }
  const json r = call({{"op", "age"}, {"latents", std::move(batch)}});
  const auto v = r.find("values");
  if (v == r.end()) throw TransportError("protocol", "batched age response lacks 'values'");
  auto values = to_doubles(*v, "values");
  if (values.size() != latents.size()) throw TransportError("protocol", "batched age count mismatch");
  return values;
}

std::vector<FeatureVector> RemoteOracle::identity_features(std::span<const LatentVector> latents) {
  json batch = json::array();
  for (const auto& s : latents) {
    check_latent(s);
    batch.push_back(latent_json(s));
  }
  const json r = call({{"op", "identity"}, {"latents", std::move(batch)}});
  const auto f = r.find("features");
  if (f == r.end() || !f->is_array()) {
    throw TransportError("protocol", "batched identity response lacks 'features'");
  }
  if (f->size() != latents.size()) throw TransportError("protocol", "batched identity count mismatch");
  std::vector<FeatureVector> out;
  out.reserve(latents.size());
  for (const auto& row : *f) {
    out.push_back(to_feature(row));
    if (out.back().size() != handshake_.feature_dim) {
      throw TransportError("protocol", "feature length differs from handshake feature_dim");
    }
  }
  return out;
}

}  // namespace latent_steer
