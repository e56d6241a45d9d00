#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pcdu {

/// Deterministic random stream keyed by (seed, purpose, epoch, sample).
///
/// The key is hashed into the state of a fresh engine, so a stream's draws
/// depend only on its key and never on which other streams were consumed
/// first. Two streams with any differing key component are independent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t epoch = 0,
            std::uint64_t sample = 0);

  std::uint64_t key() const noexcept { return key_; }

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_string(std::string_view s) noexcept;

}  // namespace pcdu
