#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

#include "ic3net/errors.hpp"

namespace ic3net::envkit {

/// Counter-based splittable generator. A draw is a pure function of
/// (key, counter), so streams are reproducible on every platform and
/// independent of thread scheduling. The mixer is the SplitMix64 finalizer.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  /// Generator for a named sub-stream, e.g. stream(seed, {epoch, update, shard}).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    Rng r(seed);
    for (std::uint64_t p : path) r.key_ = mix(r.key_ ^ mix(p + 0x9e3779b97f4a7c15ULL));
    return r;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below: empty range");
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

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn from an unnormalized non-negative weight vector.
  template <typename Weights>
  int categorical(const Weights& weights) {
    double total = 0.0;
    for (auto w : weights) total += static_cast<double>(w);
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    int i = 0;
    for (auto w : weights) {
      if (static_cast<double>(w) > 0.0) last_positive = i;
      acc += static_cast<double>(w);
      if (u < acc) return i;
      ++i;
    }
    if (last_positive < 0) throw ContractError("Rng::categorical: all weights are zero");
    return last_positive;
  }

  /// Child generator derived from this one; advances the parent by one draw.
  Rng split() {
    Rng child;
    child.key_ = mix(next_u64() ^ 0xbb67ae8584caa73bULL);
    child.counter_ = 0;
    return child;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Free-function form of Rng::split.
inline Rng rng_split(Rng& parent) { return parent.split(); }

}  // namespace ic3net::envkit
