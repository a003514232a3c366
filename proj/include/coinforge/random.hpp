#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "coinforge/errors.hpp"

namespace coinforge {

inline constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ULL;
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// SplitMix64 finalizer, used to spread raw seeds and to derive substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden64;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded stream of iid uniforms on [0,1). Replaying a seed reproduces the
// sequence bit for bit on any platform (mt19937_64 output is fixed by the
// standard). Substreams derive from the seed alone, so split(k) yields the
// same child no matter how much the parent has already consumed.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed)
      : seed_(seed), rng_(splitmix64(seed)) {}

  // next uniform in [0,1), 53 random bits
  double next() {
    ++draws_;
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const { return draws_; }
  std::uint64_t seed() const { return seed_; }

  UniformSource split(std::uint64_t stream) const {
    return UniformSource(splitmix64(seed_ ^ (stream + 1) * kGolden64));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::uint64_t draws_ = 0;
};

// standard normal via Box-Muller; consumes exactly two uniforms
inline double normal_draw(UniformSource& src) {
  const double u1 = src.next();
  const double u2 = src.next();
  // log1p(-u1) keeps the argument away from log(0); u1 < 1 always holds
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(kTwoPi * u2);
}

// Outcome of one sequential coin run.
struct CoinResult {
  int value = 0;                        // the emitted bit
  std::uint64_t iterations = 0;         // refinement steps until the decision
  std::uint64_t coins_consumed = 0;     // input coin tosses
  std::uint64_t uniforms_consumed = 0;  // auxiliary uniforms, decision draw included

  bool operator==(const CoinResult&) const = default;
};

// Anything that can be tossed and reports how often it has been. toss() may
// return a bit or, for soft coins, any value in [0,1].
template <class C>
concept CoinLike = requires(C c) {
  { c.toss() } -> std::convertible_to<double>;
  { c.consumed() } -> std::convertible_to<std::uint64_t>;
};

// A p-coin with known p; the workhorse for tests and the CLI, where the
// point is that the samplers never get told what p is.
class BernoulliCoin {
 public:
  BernoulliCoin(double p, UniformSource& src) : p_(p), src_(&src) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("BernoulliCoin: p must lie in [0,1]");
  }

  int toss() {
    ++count_;
    // strict comparison so p = 0 and p = 1 coins are exact
    return src_->next() < p_ ? 1 : 0;
  }

  std::uint64_t consumed() const { return count_; }
  double p() const { return p_; }

 private:
  double p_;
  UniformSource* src_;
  std::uint64_t count_ = 0;
};

static_assert(CoinLike<BernoulliCoin>);

}  // namespace coinforge
