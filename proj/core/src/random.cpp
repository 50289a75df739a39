#include "latent_steer/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "latent_steer/errors.hpp"

namespace latent_steer {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t Rng::index(std::uint64_t n) {
  if (n == 0) throw UsageError("Rng::index: empty range");
  __extension__ using u128 = unsigned __int128;
  return static_cast<std::uint64_t>((static_cast<u128>(engine_()) * n) >> 64);
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  out << ' ' << (spare_ ? 1 : 0);
  if (spare_) out << ' ' << std::hexfloat << *spare_;
  return out.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  int has_spare = 0;
  in >> has_spare;
  spare_.reset();
  if (has_spare) {
    std::string token;
    in >> token;
    spare_ = std::strtod(token.c_str(), nullptr);
  }
  if (!in && !in.eof()) throw UsageError("Rng::restore: malformed state");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace latent_steer
