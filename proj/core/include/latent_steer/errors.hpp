#pragma once

#include <stdexcept>
#include <string>

namespace latent_steer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or tensor shapes do not agree, or a dimension is out of range.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input is geometrically degenerate (zero vector, identical centroids, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. stepping an episode that already finished.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A numerical update produced a non-finite loss or parameter.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be parsed or failed its checksum.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation. `what()` lists every offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Remote oracle failures. `code()` is a short machine-readable tag.
class TransportError : public Error {
 public:
  TransportError(std::string code, const std::string& detail)
      : Error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A trajectory file stopped being valid JSONL partway through.
class PartialReadError : public Error {
 public:
  PartialReadError(std::size_t last_valid_line, const std::string& detail)
      : Error(detail), last_valid_line_(last_valid_line) {}

  /// Zero-based index of the last line that parsed; npos when none did.
  std::size_t last_valid_line() const noexcept { return last_valid_line_; }

 private:
  std::size_t last_valid_line_;
};

}  // namespace latent_steer
