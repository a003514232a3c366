#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>

#include "coinforge/errors.hpp"
#include "coinforge/random.hpp"

namespace coinforge {

// Slack for pathwise monotonicity and range checks.
inline constexpr double kMonotoneTol = 1e-12;
// Slack for the conditional-mean ordering checks. Looser than kMonotoneTol
// because streams compute their means from long weighted sums whose rounding
// error grows with the support width.
inline constexpr double kStarOrderTol = 1e-9;
inline constexpr std::uint64_t kDefaultMaxSteps = 1'000'000;

// One refinement step of a bound stream. lower/upper bracket the target;
// prev_lower_mean/prev_upper_mean are the conditional means of the previous
// step's bounds given everything revealed up to and including this step.
struct BoundStep {
  double lower = 0.0;
  double upper = 1.0;
  double prev_lower_mean = 0.0;
  double prev_upper_mean = 1.0;
};

template <class S>
concept BoundStream = requires(S s) {
  { s.next() } -> std::same_as<BoundStep>;
};

// Streams that can report how many input coin tosses they have consumed.
template <class S>
concept ReportsCoins = requires(const S& s) {
  { s.coins() } -> std::convertible_to<std::uint64_t>;
};

template <class S>
std::uint64_t stream_coins(const S& s) {
  if constexpr (ReportsCoins<S>)
    return s.coins();
  else
    return 0;
}

// The envelope carried across refinement steps: a nondecreasing lower and a
// nonincreasing upper value, both in [0,1], squeezed toward the target
// probability as steps arrive.
struct RefinedBounds {
  double lower = 0.0;
  double upper = 1.0;
};

// Folds one step into the envelope. The correction terms rescale the step's
// progress relative to the conditional means of the previous bounds, which
// keeps the envelope's expectation pinned to the step bounds' expectation.
// Gap identity: new gap == old gap * (upper - lower) / mean span.
inline RefinedBounds refine_bounds(const RefinedBounds& cur, const BoundStep& step) {
  const double span = step.prev_upper_mean - step.prev_lower_mean;
  if (!(span > 0.0))
    throw contract_violation("refine_bounds: conditional-mean span must be positive");
  const double gap = cur.upper - cur.lower;
  const double rise = (step.lower - step.prev_lower_mean) / span;
  const double drop = (step.prev_upper_mean - step.upper) / span;
  return {cur.lower + rise * gap, cur.upper - drop * gap};
}

namespace detail {

inline void check_unit_range(const BoundStep& s, const char* who) {
  if (!(s.lower <= s.upper + kMonotoneTol))
    throw contract_violation(std::string(who) + ": lower bound exceeds upper bound");
  if (s.lower < -kMonotoneTol || s.upper > 1.0 + kMonotoneTol)
    throw contract_violation(std::string(who) + ": bounds left the unit interval");
}

inline void check_mean_order(const BoundStep& s, const char* who) {
  if (s.prev_lower_mean > s.lower + kStarOrderTol ||
      s.prev_upper_mean < s.upper - kStarOrderTol)
    throw contract_violation(std::string(who) +
                             ": conditional means must bracket the new bounds");
}

}  // namespace detail

// Coin from a one-shot unbiased estimator with values in [0,1]: success iff
// the decision uniform lands below the estimate.
template <class Estimator>
CoinResult estimator_coin(Estimator&& estimate, UniformSource& src) {
  const std::uint64_t u0 = src.draws();
  const double g0 = src.next();
  const double shat = estimate(src);
  if (!(shat >= 0.0 && shat <= 1.0))
    throw contract_violation("estimator_coin: estimate outside [0,1]");
  return {g0 <= shat ? 1 : 0, 1, 0, src.draws() - u0};
}

// Coin from deterministic bound sequences (indexed from 1) converging to the
// same limit. The sequences need not be monotone; a running sup/inf
// monotonizes them on the fly.
template <class LowerFn, class UpperFn>
CoinResult interval_coin(LowerFn&& lower, UpperFn&& upper, UniformSource& src,
                         std::uint64_t max_steps = kDefaultMaxSteps) {
  const std::uint64_t u0 = src.draws();
  const double g0 = src.next();
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    lo = std::max(lo, static_cast<double>(lower(n)));
    hi = std::min(hi, static_cast<double>(upper(n)));
    if (lo > hi + kMonotoneTol)
      throw contract_violation("interval_coin: bound sequences crossed");
    if (g0 <= lo) return {1, n, 0, src.draws() - u0};
    if (g0 > hi) return {0, n, 0, src.draws() - u0};
  }
  throw did_not_converge("interval_coin: no decision within max_steps");
}

// Coin from a bound stream whose paths are almost surely monotone: lower
// bounds never decrease, upper bounds never increase. Bounds may leave
// [0,1] on the open side (lower above -inf, upper below +inf) as long as
// lower stays <= 1 and upper stays >= 0.
template <class S>
  requires BoundStream<std::remove_cvref_t<S>>
CoinResult monotone_coin(S&& stream, UniformSource& src,
                         std::uint64_t max_steps = kDefaultMaxSteps) {
  const std::uint64_t u0 = src.draws();
  const std::uint64_t c0 = stream_coins(stream);
  const double g0 = src.next();
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    const BoundStep step = stream.next();
    if (!(step.lower <= step.upper + kMonotoneTol))
      throw contract_violation("monotone_coin: lower bound exceeds upper bound");
    if (step.lower > 1.0 + kMonotoneTol || step.upper < -kMonotoneTol)
      throw contract_violation("monotone_coin: bounds outside their admissible range");
    if (step.lower < lo - kMonotoneTol || step.upper > hi + kMonotoneTol)
      throw contract_violation("monotone_coin: stream is not pathwise monotone");
    lo = step.lower;
    hi = step.upper;
    if (g0 <= lo) return {1, n, stream_coins(stream) - c0, src.draws() - u0};
    if (g0 > hi) return {0, n, stream_coins(stream) - c0, src.draws() - u0};
  }
  throw did_not_converge("monotone_coin: no decision within max_steps");
}

// Coin from a general bound stream that also reports conditional means. The
// stream's raw bounds may jitter; refine_bounds turns them into a monotone
// envelope online, and the decision uniform is tested against that envelope.
template <class S>
  requires BoundStream<std::remove_cvref_t<S>>
CoinResult martingale_coin(S&& stream, UniformSource& src,
                           std::uint64_t max_steps = kDefaultMaxSteps) {
  const std::uint64_t u0 = src.draws();
  const std::uint64_t c0 = stream_coins(stream);
  const double g0 = src.next();
  RefinedBounds cur;
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    const BoundStep step = stream.next();
    detail::check_unit_range(step, "martingale_coin");
    detail::check_mean_order(step, "martingale_coin");
    if (n == 1 && (std::abs(step.prev_lower_mean) > kMonotoneTol ||
                   std::abs(step.prev_upper_mean - 1.0) > kMonotoneTol))
      throw contract_violation(
          "martingale_coin: first step must condition on the trivial bounds 0 and 1");
    const double span = step.prev_upper_mean - step.prev_lower_mean;
    if (span <= 0.0) {
      // Degenerate step: the mean ordering forces lower == upper == both
      // means, so the envelope can never move again. Decide now.
      return {g0 <= cur.lower ? 1 : 0, n, stream_coins(stream) - c0,
              src.draws() - u0};
    }
    cur = refine_bounds(cur, step);
    if (g0 <= cur.lower) return {1, n, stream_coins(stream) - c0, src.draws() - u0};
    if (g0 > cur.upper) return {0, n, stream_coins(stream) - c0, src.draws() - u0};
  }
  throw did_not_converge("martingale_coin: no decision within max_steps");
}

// Adapts deterministic bound callables (indexed from 1) into a BoundStream.
// The conditional means of deterministic previous bounds are the bounds
// themselves; the first step conditions on the trivial bounds base_lower,
// base_upper.
template <class LowerFn, class UpperFn>
class DeterministicBoundStream {
 public:
  DeterministicBoundStream(LowerFn lower, UpperFn upper, double base_lower = 0.0,
                           double base_upper = 1.0)
      : lower_(std::move(lower)),
        upper_(std::move(upper)),
        prev_lower_(base_lower),
        prev_upper_(base_upper) {}

  BoundStep next() {
    ++n_;
    const BoundStep step{static_cast<double>(lower_(n_)),
                         static_cast<double>(upper_(n_)), prev_lower_, prev_upper_};
    prev_lower_ = step.lower;
    prev_upper_ = step.upper;
    return step;
  }

 private:
  LowerFn lower_;
  UpperFn upper_;
  std::uint64_t n_ = 0;
  double prev_lower_;
  double prev_upper_;
};

// Affine view of a stream whose bounds live in [-scale, scale], mapped onto
// the unit interval via x -> (scale + x) / (2 scale).
template <class S>
  requires BoundStream<S>
class RescaledBoundStream {
 public:
  RescaledBoundStream(S& inner, double scale) : inner_(&inner), scale_(scale) {
    if (!(scale > 0.0))
      throw std::invalid_argument("RescaledBoundStream: scale must be positive");
  }

  BoundStep next() {
    const BoundStep raw = inner_->next();
    const double slack = scale_ * kMonotoneTol;
    for (double v : {raw.lower, raw.upper, raw.prev_lower_mean, raw.prev_upper_mean})
      if (!(v >= -scale_ - slack && v <= scale_ + slack))
        throw contract_violation("RescaledBoundStream: bound outside [-scale, scale]");
    const auto map = [this](double x) { return (scale_ + x) / (2.0 * scale_); };
    return {map(raw.lower), map(raw.upper), map(raw.prev_lower_mean),
            map(raw.prev_upper_mean)};
  }

  std::uint64_t coins() const
    requires ReportsCoins<S>
  {
    return inner_->coins();
  }

 private:
  S* inner_;
  double scale_;
};

struct EstimateResult {
  double value = 0.0;
  CoinResult run;
};

// Unbiased two-point estimator of the limit of a bound stream with bounds in
// [-scale, scale]: rescale onto the unit interval, run the martingale coin,
// and map the bit back to {-scale, +scale}. The mean of the returned value
// equals the stream's target.
template <class S>
  requires BoundStream<std::remove_cvref_t<S>>
EstimateResult unbiased_estimate(S&& stream, double scale, UniformSource& src,
                                 std::uint64_t max_steps = kDefaultMaxSteps) {
  RescaledBoundStream<std::remove_cvref_t<S>> rescaled(stream, scale);
  const CoinResult run = martingale_coin(rescaled, src, max_steps);
  return {run.value ? scale : -scale, run};
}

}  // namespace coinforge
