#include "pcdu/rng.hpp"

namespace pcdu {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finaliser
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) noexcept {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t epoch,
                     std::uint64_t sample) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ hash_string(purpose));
  k = mix64(k ^ epoch);
  k = mix64(k ^ (sample * 0x2545f4914f6cdd1dULL));
  key_ = k;
  std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                    static_cast<std::uint32_t>(mix64(k)), static_cast<std::uint32_t>(mix64(k) >> 32)};
  engine_.seed(seq);
}

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double RngStream::uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

double RngStream::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

}  // namespace pcdu
