#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latent_steer/oracle.hpp"

namespace latent_steer {

/// Where a remote oracle lives.
///
///   stdio:<shell command>   spawn the command, talk over its stdin/stdout
///   tcp://<host>:<port>     connect to a listening server
struct Endpoint {
  enum class Kind { stdio, tcp };

  Kind kind = Kind::stdio;
  std::string command;  // stdio
  std::string host;     // tcp
  int port = 0;         // tcp

  static Endpoint parse(const std::string& uri);
  std::string uri() const;
};

/// First line sent by a server.
struct Handshake {
  std::string protocol;
  int d = 0;
  int feature_dim = 0;
  std::vector<std::string> ops;

  bool supports(const std::string& op) const;
};

inline constexpr const char* kOracleProtocol = "latent-oracle/1";

/// Newline-delimited JSON byte stream over a pair of file descriptors.
class LineChannel {
 public:
  static std::unique_ptr<LineChannel> open(const Endpoint& endpoint);
  /// Wraps already-open descriptors; takes ownership. Used by tests.
  LineChannel(int read_fd, int write_fd, int child_pid = -1);
  ~LineChannel();

  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  void write_line(const std::string& line);
  /// Throws TransportError("timeout") or TransportError("closed").
  std::string read_line(std::chrono::milliseconds timeout);

 private:
  int read_fd_;
  int write_fd_;
  int child_pid_;
  std::string buffer_;
};

/// Client for the NDJSON oracle protocol.
///
/// Requests carry increasing integer ids. Several requests may be written
/// before any response is read; responses are matched back by id. Any
/// failure surfaces as a TransportError and never as a default value.
class RemoteOracle final : public Oracle {
 public:
  explicit RemoteOracle(const std::string& uri,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30));
  RemoteOracle(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout,
               std::string description = "remote");

  const Handshake& handshake() const noexcept { return handshake_; }

  int dim() const override { return handshake_.d; }
  int feature_dim() const override { return handshake_.feature_dim; }

  double age_of(const LatentVector& s) override;
  FeatureVector identity_features(const LatentVector& s) override;
  std::vector<double> ages_of(std::span<const LatentVector> latents) override;
  std::vector<FeatureVector> identity_features(std::span<const LatentVector> latents) override;

  std::string describe() const override { return description_; }

  /// Sends one request (an "id" is assigned) and returns the matching
  /// successful response object.
  nlohmann::json call(nlohmann::json request);
  /// Pipelined form: writes every request, then collects responses by id.
  /// Results are returned in request order.
  std::vector<nlohmann::json> call_many(std::vector<nlohmann::json> requests);

 private:
  void read_handshake();
  void check_latent(const LatentVector& s) const;

  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::string description_;
  Handshake handshake_;
  std::int64_t next_id_ = 1;
};

}  // namespace latent_steer
