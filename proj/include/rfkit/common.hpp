#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

#define RFKIT_VERSION "0.1.0"

namespace rfkit {

/// Bad arguments, malformed inputs, violated preconditions. CLI exit code 2.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Filesystem and stream failures. CLI exit code 3.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are required. CLI exit code 4.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace rng {

// All randomness in the toolkit flows from explicit 64-bit seeds. Sub-streams
// are derived, never shared: derive(base, stream, a, b, c) feeds the base seed
// and the stream tag through a splitmix64 chain, so any cell of any experiment
// can be reproduced in isolation from the base seed alone.
//
// Stream assignments:
//   data_gen     gen_circle_annulus
//   shuffle      dataset split
//   subsample    bandwidth_heuristic point subsample
//   feature_pool sampling the M-feature candidate pool
//   features     sampling a plain feature set
//   probe        choosing the L leverage probe points
//   resample     leverage-weighted feature resampling
//   train        stochastic solver sample order
//   test_set     harness shared test set
//   train_set    harness per-repeat training sets
//   selection    harness per-repeat selection configs
enum class stream : std::uint64_t {
  data_gen = 0x01,
  shuffle = 0x02,
  subsample = 0x03,
  feature_pool = 0x04,
  features = 0x05,
  probe = 0x06,
  resample = 0x07,
  train = 0x08,
  test_set = 0x09,
  train_set = 0x0a,
  selection = 0x0b,
};

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t base, stream s, std::uint64_t a = 0,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = splitmix64(base ^ static_cast<std::uint64_t>(s));
  z = splitmix64(z ^ a);
  z = splitmix64(z ^ b);
  z = splitmix64(z ^ c);
  return z;
}

}  // namespace rng

/// FNV-1a over raw bytes; used for manifest fingerprints, not security.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

/// Shortest text form that parses back to the identical binary64 value.
inline std::string format_f64(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_f64(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw validation_error("not a number: '" + std::string(s) + "'");
  return v;
}

inline long long parse_i64(std::string_view s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw validation_error("not an integer: '" + std::string(s) + "'");
  return v;
}

}  // namespace rfkit
