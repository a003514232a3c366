#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coinforge/alternating.hpp"
#include "coinforge/errors.hpp"
#include "coinforge/random.hpp"

namespace coinforge {

// Scalar diffusion with unit noise: dX = drift(X) dt + dW, started at
// `start` and sampled at time `horizon`. The sampler needs the drift, its
// slope, its antiderivative (drift_integral, zero at the origin), and two
// declared constants: functional_floor <= (drift^2 + slope)/2 <=
// functional_floor + functional_range everywhere of interest, plus
// drift_integral_max = sup drift_integral for endpoint rejection.
struct DiffusionSpec {
  std::string name;
  std::function<double(double)> drift;
  std::function<double(double)> drift_slope;
  std::function<double(double)> drift_integral;
  double functional_floor = 0.0;
  double functional_range = 1.0;
  double horizon = 1.0;
  double start = 0.0;
  double drift_integral_max = 0.0;
};

inline constexpr double kSpecGridTol = 1e-9;

// Drift functional normalized onto [0,1]: ((drift^2 + slope)/2 - floor) /
// range. Values escaping [0,1] beyond tolerance mean the declared floor or
// range is wrong, which voids the sampler's correctness, so this throws
// rather than clamping silently.
inline double intensity(const DiffusionSpec& spec, double u) {
  const double d = spec.drift(u);
  const double f = 0.5 * (d * d + spec.drift_slope(u));
  const double value = (f - spec.functional_floor) / spec.functional_range;
  if (value < -kSpecGridTol || value > 1.0 + kSpecGridTol)
    throw contract_violation("intensity: drift functional outside declared bounds");
  return std::clamp(value, 0.0, 1.0);
}

// Grid check of the declared constants over [lo, hi].
inline void validate_spec(const DiffusionSpec& spec, double lo, double hi,
                          int points = 10000) {
  if (!(spec.horizon > 0.0))
    throw contract_violation("DiffusionSpec: horizon must be positive");
  if (!(spec.functional_range > 0.0))
    throw contract_violation("DiffusionSpec: functional_range must be positive");
  if (!spec.drift || !spec.drift_slope || !spec.drift_integral)
    throw contract_violation("DiffusionSpec: drift, slope and integral are required");
  for (int i = 0; i < points; ++i) {
    const double u = lo + (hi - lo) * i / (points - 1);
    const double d = spec.drift(u);
    const double f = 0.5 * (d * d + spec.drift_slope(u));
    if (f < spec.functional_floor - kSpecGridTol ||
        f > spec.functional_floor + spec.functional_range + kSpecGridTol)
      throw contract_violation(
          "DiffusionSpec: drift functional leaves [floor, floor + range] near u=" +
          std::to_string(u));
    if (spec.drift_integral(u) > spec.drift_integral_max + kSpecGridTol)
      throw contract_violation(
          "DiffusionSpec: drift_integral exceeds its declared maximum near u=" +
          std::to_string(u));
  }
}

// Default interval: a wide band around the start point, covering where
// endpoint proposals and bridge excursions land at this horizon.
inline void validate_spec(const DiffusionSpec& spec) {
  const double half = 6.0 * std::sqrt(spec.horizon) + 1.0;
  validate_spec(spec, spec.start - half, spec.start + half);
}

inline DiffusionSpec zero_drift_spec(double start, double horizon) {
  DiffusionSpec spec;
  spec.name = "zero";
  spec.drift = [](double) { return 0.0; };
  spec.drift_slope = [](double) { return 0.0; };
  spec.drift_integral = [](double) { return 0.0; };
  spec.functional_floor = 0.0;
  // the functional is identically zero; any positive range is valid, and
  // 0.5 keeps range * horizon below 1 at the default horizon 1
  spec.functional_range = 0.5;
  spec.horizon = horizon;
  spec.start = start;
  spec.drift_integral_max = 0.0;
  return spec;
}

inline DiffusionSpec sine_drift_spec(double start, double horizon) {
  DiffusionSpec spec;
  spec.name = "sine";
  spec.drift = [](double u) { return std::sin(u); };
  spec.drift_slope = [](double u) { return std::cos(u); };
  spec.drift_integral = [](double u) { return 1.0 - std::cos(u); };
  // (sin^2 + cos)/2 has minimum -1/2 (at cos = -1) and maximum 5/8
  // (at cos = 1/2), so floor -1/2 and range 9/8 are tight
  spec.functional_floor = -0.5;
  spec.functional_range = 9.0 / 8.0;
  spec.horizon = horizon;
  spec.start = start;
  spec.drift_integral_max = 2.0;
  return spec;
}

struct EndpointDraw {
  double value = 0.0;
  std::uint64_t proposals = 0;
};

// Draw from the density proportional to exp(drift_integral(u)) *
// gaussian(u; start, horizon): propose from the Gaussian and accept with
// probability exp(drift_integral(u) - drift_integral_max). When the drift
// integral is identically its maximum (zero drift) this is a single
// Gaussian draw.
inline EndpointDraw sample_biased_endpoint(const DiffusionSpec& spec,
                                           UniformSource& src,
                                           std::uint64_t max_proposals = 1000000) {
  const double sd = std::sqrt(spec.horizon);
  for (std::uint64_t i = 1; i <= max_proposals; ++i) {
    const double u = spec.start + sd * normal_draw(src);
    const double log_ratio = spec.drift_integral(u) - spec.drift_integral_max;
    if (log_ratio > kSpecGridTol)
      throw contract_violation(
          "sample_biased_endpoint: drift_integral exceeds its declared maximum");
    if (log_ratio >= 0.0) return {u, i};
    if (src.next() < std::exp(log_ratio)) return {u, i};
  }
  throw did_not_converge("sample_biased_endpoint: no acceptance within max_proposals");
}

// Brownian bridge revealed lazily: starts with only its endpoints and fills
// in values on demand by exact Gaussian conditioning on the two nearest
// already-revealed neighbors. No discretization enters anywhere.
class BridgeSkeleton {
 public:
  BridgeSkeleton(double horizon, double start, double end) : horizon_(horizon) {
    if (!(horizon > 0.0))
      throw std::invalid_argument("BridgeSkeleton: horizon must be positive");
    points_[0.0] = start;
    points_[horizon] = end;
  }

  double horizon() const { return horizon_; }
  double start() const { return points_.begin()->second; }
  double end() const { return points_.rbegin()->second; }
  std::size_t size() const { return points_.size(); }
  const std::map<double, double>& points() const { return points_; }

  // Reveals the value at time t; repeated queries return the stored value.
  double value_at(double t, UniformSource& src) {
    if (!(t >= 0.0 && t <= horizon_))
      throw std::out_of_range("BridgeSkeleton: time outside [0, horizon]");
    const auto right = points_.lower_bound(t);
    if (right != points_.end() && right->first == t) return right->second;
    const auto left = std::prev(right);
    const double tl = left->first;
    const double tr = right->first;
    const double frac = (t - tl) / (tr - tl);
    const double mean = left->second + frac * (right->second - left->second);
    const double var = (t - tl) * (tr - t) / (tr - tl);
    const double value = mean + std::sqrt(var) * normal_draw(src);
    points_.emplace_hint(right, t, value);
    return value;
  }

 private:
  double horizon_;
  std::map<double, double> points_;
};

// Bit coin attached to one bridge: each toss picks a uniform time, reveals
// the bridge there, and succeeds if a fresh uniform falls below the
// intensity at the revealed value. Conditional on the full bridge path the
// tosses are iid; their latent success probability is the time average of
// the intensity along the path.
class IntensityCoin {
 public:
  IntensityCoin(BridgeSkeleton& skel, const DiffusionSpec& spec, UniformSource& src)
      : skel_(&skel), spec_(&spec), src_(&src) {}

  int toss() {
    ++count_;
    const double chi = src_->next() * skel_->horizon();
    const double psi = src_->next();
    const double w = skel_->value_at(chi, *src_);
    return psi < intensity(*spec_, w) ? 1 : 0;
  }

  std::uint64_t consumed() const { return count_; }

 private:
  BridgeSkeleton* skel_;
  const DiffusionSpec* spec_;
  UniformSource* src_;
  std::uint64_t count_ = 0;
};

static_assert(CoinLike<IntensityCoin>);

struct ExactSampleResult {
  double value = 0.0;
  std::uint64_t proposals = 0;
  std::uint64_t intensity_coins = 0;   // across all proposals
  std::uint64_t bridge_points = 0;     // interior reveals on the accepted bridge
  std::uint64_t uniforms_consumed = 0;
};

// Exact draw of the diffusion endpoint: propose the endpoint from its
// biased-Brownian law, then accept with probability exp(-range * horizon *
// J) where J is the latent time-averaged intensity of the connecting
// bridge. The acceptance bit comes from the conditional exponential coin
// over intensity-coin tosses, so J is never computed; the bridge is only
// revealed at the finitely many times the coin tosses ask for.
//
// Requires functional_range * horizon < 1 (the exponential coefficients
// must be nonincreasing); callers with longer horizons segment first.
inline ExactSampleResult exact_sample(const DiffusionSpec& spec, UniformSource& src,
                                      std::uint64_t max_proposals = 100000) {
  const double rate = spec.functional_range * spec.horizon;
  if (!(rate < 1.0))
    throw std::invalid_argument(
        "exact_sample: functional_range * horizon must be below 1; "
        "split the horizon into segments");
  const std::uint64_t u0 = src.draws();
  ExactSampleResult out;
  for (std::uint64_t prop = 1; prop <= max_proposals; ++prop) {
    const EndpointDraw endpoint = sample_biased_endpoint(spec, src);
    BridgeSkeleton skel(spec.horizon, spec.start, endpoint.value);
    IntensityCoin coin(skel, spec, src);
    const CoinResult accept = conditional_exponential_coin(rate, coin, src);
    out.intensity_coins += accept.coins_consumed;
    if (accept.value) {
      out.value = endpoint.value;
      out.proposals = prop;
      out.bridge_points = skel.size() - 2;
      out.uniforms_consumed = src.draws() - u0;
      return out;
    }
  }
  throw did_not_converge("exact_sample: no acceptance within max_proposals");
}

// Splits [0, total_horizon] into the fewest equal pieces with
// range * piece <= margin; each piece carries the same drift data.
inline std::vector<DiffusionSpec> segment_horizon(const DiffusionSpec& spec,
                                                  double total_horizon,
                                                  double margin = 0.9) {
  if (!(total_horizon > 0.0))
    throw std::invalid_argument("segment_horizon: total horizon must be positive");
  if (!(margin > 0.0 && margin < 1.0))
    throw std::invalid_argument("segment_horizon: margin must lie in (0,1)");
  const double load = spec.functional_range * total_horizon;
  const int m = std::max(1, static_cast<int>(std::ceil(load / margin - 1e-12)));
  std::vector<DiffusionSpec> segments(m, spec);
  for (auto& seg : segments) seg.horizon = total_horizon / m;
  return segments;
}

struct ChainedSampleResult {
  double value = 0.0;
  std::uint64_t segments = 0;
  std::uint64_t proposals = 0;
  std::uint64_t intensity_coins = 0;
  std::uint64_t uniforms_consumed = 0;
};

// Markov chaining: run the exact sampler segment by segment, feeding each
// endpoint in as the next start.
inline ChainedSampleResult sample_chained(const DiffusionSpec& spec,
                                          double total_horizon, UniformSource& src,
                                          double margin = 0.9,
                                          std::uint64_t max_proposals = 100000) {
  std::vector<DiffusionSpec> segments = segment_horizon(spec, total_horizon, margin);
  ChainedSampleResult out;
  out.segments = segments.size();
  double x = spec.start;
  for (auto& seg : segments) {
    seg.start = x;
    const ExactSampleResult res = exact_sample(seg, src, max_proposals);
    x = res.value;
    out.proposals += res.proposals;
    out.intensity_coins += res.intensity_coins;
    out.uniforms_consumed += res.uniforms_consumed;
  }
  out.value = x;
  return out;
}

}  // namespace coinforge
