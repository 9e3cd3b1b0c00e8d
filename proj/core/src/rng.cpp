#include "overlapgan/rng.hpp"

#include <cmath>
#include <numbers>

namespace ogan {

namespace {

// splitmix64 finalizer; full 64-bit avalanche.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t run_seed, std::string_view name)
    : key_(mix64(mix64(run_seed) ^ fnv1a(name))) {}

std::uint64_t RngStream::next_u64() {
  return mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::uniform_range(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  // Pairless Box-Muller: the sin branch is discarded so the stream state is
  // just the counter (two ticks per draw).
  double u1 = uniform_pos();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
         (n == 0 ? 1 : n);
}

RngStream& RngHub::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(name, RngStream(run_seed_, name)).first;
  }
  return it->second;
}

std::map<std::string, std::uint64_t> RngHub::positions() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [name, s] : streams_) out.emplace(name, s.counter());
  return out;
}

void RngHub::restore_positions(
    const std::map<std::string, std::uint64_t>& positions) {
  for (const auto& [name, counter] : positions) stream(name).set_counter(counter);
}

}  // namespace ogan
