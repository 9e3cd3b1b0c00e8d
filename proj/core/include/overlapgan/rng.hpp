#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ogan {

namespace detail_rng {

// splitmix64 finalizer; full 64-bit avalanche.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail_rng

// Counter-based stream: every draw is a pure function of (key, counter), so a
// stream's state is fully captured by its counter. Streams derived from the
// same run seed but different names are independent.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t run_seed, std::string_view name);

  // Raw 64 random bits; advances the counter by one.
  std::uint64_t next_u64() {
    return detail_rng::mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  // Uniform on (0, 1]; used where log(u) must stay finite.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }
  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // Standard normal via Box-Muller; consumes exactly two counter ticks.
  double normal();

  // Integer in [0, n); n >= 1.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Named-stream registry for one run. Streams are created on first use; their
// counters can be dumped and restored for checkpointing.
class RngHub {
 public:
  RngHub() = default;
  explicit RngHub(std::uint64_t run_seed) : run_seed_(run_seed) {}

  std::uint64_t run_seed() const { return run_seed_; }
  RngStream& stream(const std::string& name);

  std::map<std::string, std::uint64_t> positions() const;
  void restore_positions(const std::map<std::string, std::uint64_t>& positions);

 private:
  std::uint64_t run_seed_ = 0;
  std::map<std::string, RngStream> streams_;
};

}  // namespace ogan
