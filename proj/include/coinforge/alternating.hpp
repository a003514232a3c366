#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coinforge/errors.hpp"
#include "coinforge/martingale.hpp"
#include "coinforge/random.hpp"

namespace coinforge {

// Coefficients a_k = rate^k / k!, computed by the running recurrence
// a_k = a_{k-1} * rate / k. For rate <= 1 the sequence is nonincreasing from
// a_0 = 1, which is exactly what the alternating-series stream requires.
class ExpSeries {
 public:
  explicit ExpSeries(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate <= 1.0))
      throw std::invalid_argument("ExpSeries: rate must lie in [0,1]");
    memo_.push_back(1.0);
  }

  double operator()(std::uint64_t k) const {
    while (memo_.size() <= k)
      memo_.push_back(memo_.back() * rate_ / static_cast<double>(memo_.size()));
    return memo_[k];
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  mutable std::vector<double> memo_;
};

// Pathwise-monotone bound stream for targets with an alternating series in
// the coin's success probability, sum_k (-1)^k a_k p^k with coefficients
// nonincreasing from a_0 <= 1. Odd steps pull the lower bound up to the
// running upper bound minus the tail term; even steps push the upper bound
// down to the running lower bound plus it. The tail term is the next
// coefficient times the running product of coin outcomes, so once a toss
// comes up zero the bounds collapse and the run decides on the spot. All
// updates are sums and products of nonnegative terms, so the bounds stay
// ordered and monotone exactly, with no tolerance.
//
// The coin may be soft (values in [0,1]); only conditional iid-ness given
// the caller's latent state is assumed.
template <CoinLike Coin, class Coeffs>
class AlternatingBoundStream {
 public:
  AlternatingBoundStream(Coeffs coeffs, Coin& coin)
      : coeffs_(std::move(coeffs)), coin_(&coin), base_coins_(coin.consumed()) {
    const double a0 = coeffs_(0);
    if (!(a0 >= 0.0 && a0 <= 1.0))
      throw contract_violation("AlternatingBoundStream: leading coefficient outside [0,1]");
    upper_ = a0;
    prev_coeff_ = a0;
  }

  BoundStep next() {
    // First step conditions on the trivial bounds; afterwards the previous
    // bounds are measurable from the revealed tosses, so they are their own
    // conditional means.
    const double mean_lower = n_ == 0 ? 0.0 : lower_;
    const double mean_upper = n_ == 0 ? 1.0 : upper_;
    ++n_;
    const double a = coeffs_(n_);
    if (!(a >= 0.0 && a <= prev_coeff_))
      throw contract_violation(
          "AlternatingBoundStream: coefficients must be nonincreasing and nonnegative");
    prev_coeff_ = a;
    if (prod_ > 0.0) {
      const double x = static_cast<double>(coin_->toss());
      if (!(x >= 0.0 && x <= 1.0))
        throw contract_violation("AlternatingBoundStream: coin outcome outside [0,1]");
      prod_ *= x;
    }
    const double term = a * prod_;
    if (n_ % 2 == 1)
      lower_ = upper_ - term;
    else
      upper_ = lower_ + term;
    return BoundStep{lower_, upper_, mean_lower, mean_upper};
  }

  std::uint64_t coins() const { return coin_->consumed() - base_coins_; }
  double partial_product() const { return prod_; }

 private:
  Coeffs coeffs_;
  Coin* coin_;
  std::uint64_t base_coins_;
  std::uint64_t n_ = 0;
  double prod_ = 1.0;
  double lower_ = 0.0;
  double upper_ = 1.0;
  double prev_coeff_ = 1.0;
};

template <CoinLike Coin, class Coeffs>
AlternatingBoundStream<Coin, Coeffs> alternating_bounds(Coeffs coeffs, Coin& coin) {
  return AlternatingBoundStream<Coin, Coeffs>(std::move(coeffs), coin);
}

// exp(-rate * p)-coin from a p-coin, rate in [0,1]. The iteration count
// exceeds n with probability (rate * p)^n / n!, so the expected number of
// coin tosses is exp(rate * p) <= e.
template <CoinLike Coin>
CoinResult exponential_coin(double rate, Coin& coin, UniformSource& src,
                            std::uint64_t max_steps = kDefaultMaxSteps) {
  auto stream = alternating_bounds(ExpSeries(rate), coin);
  return monotone_coin(stream, src, max_steps);
}

// Same construction driven by a soft coin whose success probability is
// itself random (fixed within one run): conditionally on that latent value
// J, the result is an exp(-rate * J)-coin. The stream never needs to know
// J; conditional iid-ness of the tosses is enough.
template <CoinLike SoftCoin>
CoinResult conditional_exponential_coin(double rate, SoftCoin& soft_coin,
                                        UniformSource& src,
                                        std::uint64_t max_steps = kDefaultMaxSteps) {
  auto stream = alternating_bounds(ExpSeries(rate), soft_coin);
  return monotone_coin(stream, src, max_steps);
}

}  // namespace coinforge
