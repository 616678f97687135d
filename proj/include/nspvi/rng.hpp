#ifndef NSPVI_RNG_HPP
#define NSPVI_RNG_HPP

#include <cstdint>
#include <limits>

namespace nspvi {

// Tags separating the independent random streams of one run.
enum class Purpose : std::uint64_t {
  generate = 1,
  mcmc = 2,
  variational = 3,
  future = 4,
  shuffle = 5,
  init = 6,
  validation = 7,
  predict = 8,
  test = 9,
};

// Counter-based stream: the n-th output is a bijective mix of (key, n), so a
// stream is fully determined by its key and position. Keys are derived from
// (seed, sequence id, purpose, index); streams with different keys are
// statistically independent for practical purposes.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key = 0) : key_(mix(key ^ 0x6a09e667f3bcc909ULL)) {}
  RngStream(std::uint64_t seed, std::uint64_t sequence, Purpose purpose, std::uint64_t index = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unit-rate exponential.
  double exponential();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  // Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t tag) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace nspvi

#endif  // NSPVI_RNG_HPP
