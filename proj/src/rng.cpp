#include "nspvi/rng.hpp"

#include <cmath>

namespace nspvi {

RngStream::RngStream(std::uint64_t seed, std::uint64_t sequence, Purpose purpose,
                     std::uint64_t index) {
  std::uint64_t k = mix(seed + 0x243f6a8885a308d3ULL);
  k = mix(k ^ (sequence * 0x9e3779b97f4a7c15ULL + 0x13198a2e03707344ULL));
  k = mix(k ^ (static_cast<std::uint64_t>(purpose) * 0xa4093822299f31d0ULL));
  k = mix(k ^ (index * 0x082efa98ec4e6c89ULL + 0x452821e638d01377ULL));
  key_ = k;
}

double RngStream::exponential() { return -std::log(uniform()); }

std::uint64_t RngStream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

RngStream RngStream::split(std::uint64_t tag) const {
  RngStream child;
  child.key_ = mix(key_ ^ mix(tag + 0xb7e151628aed2a6bULL));
  return child;
}

}  // namespace nspvi
