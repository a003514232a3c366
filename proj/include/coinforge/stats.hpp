#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace coinforge {

// Two-sample Kolmogorov-Smirnov statistic, ties handled by advancing both
// samples through equal values together.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_statistic: samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

// One-sample statistic against a reference CDF.
template <class Cdf>
double ks_statistic_against(std::vector<double> a, Cdf&& cdf) {
  if (a.empty())
    throw std::invalid_argument("ks_statistic_against: sample must be nonempty");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

// Asymptotic two-sample critical value at significance alpha:
// c(alpha) * sqrt((n+m)/(n*m)) with c = sqrt(-log(alpha/2)/2).
inline double ks_two_sample_critical(double alpha, std::size_t n, std::size_t m) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ks_two_sample_critical: alpha must be in (0,1)");
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) /
                       (static_cast<double>(n) * static_cast<double>(m)));
}

inline double ks_one_sample_critical(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ks_one_sample_critical: alpha must be in (0,1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) /
         std::sqrt(static_cast<double>(n));
}

// Quantile by linear interpolation of order statistics; input need not be
// sorted.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("quantile: q must lie in [0,1]");
  std::sort(xs.begin(), xs.end());
  const double pos = q * (xs.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

// Wald-Wolfowitz runs test on a bit sequence: z-score of the observed
// number of runs against its null mean/variance given the observed counts.
// Degenerate sequences (all zeros or all ones) return z = 0.
inline double runs_test_z(const std::vector<int>& bits) {
  const auto n = bits.size();
  if (n < 2) throw std::invalid_argument("runs_test_z: need at least 2 bits");
  double n1 = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("runs_test_z: bits only");
    n1 += b;
  }
  const double n0 = static_cast<double>(n) - n1;
  if (n0 == 0 || n1 == 0) return 0.0;
  double runs = 1;
  for (std::size_t i = 1; i < n; ++i) runs += bits[i] != bits[i - 1];
  const double mean = 1.0 + 2.0 * n0 * n1 / static_cast<double>(n);
  const double var = 2.0 * n0 * n1 * (2.0 * n0 * n1 - static_cast<double>(n)) /
                     (static_cast<double>(n) * static_cast<double>(n) *
                      (static_cast<double>(n) - 1.0));
  return (runs - mean) / std::sqrt(var);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace coinforge
