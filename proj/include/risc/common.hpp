#pragma once

#include <charconv>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <system_error>

namespace risc {

/// Raised when a caller violates an operation's precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input is too large for a tabular routine.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Raised for math-domain violations such as OVPD at a goal cell.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for malformed experiment configurations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named RNG streams; each concern gets its own generator derived from the root seed.
enum class Stream : std::uint64_t {
  Action = 1,
  Switch = 2,
  Replay = 3,
  Environment = 4,
  Bootstrap = 5,
};

inline Rng make_stream(std::uint64_t root_seed, Stream stream) {
  return Rng{mix64(mix64(root_seed) ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL))};
}

inline Rng make_stream(std::uint64_t root_seed, std::uint64_t substream) {
  return Rng{mix64(mix64(root_seed) + mix64(substream + 0x5851f42d4c957f2dULL))};
}

// Both helpers are written out instead of using <random> distributions so that
// draws are identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Lemire's nearly-divisionless bounded draw.
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Shortest round-trip decimal representation; used for every number written to disk.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace risc
