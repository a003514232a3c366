#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace coinforge {

using rational = boost::multiprecision::cpp_rational;
using bigint = boost::multiprecision::cpp_int;

// Exact binomial coefficient for n <= 64; every C(n,k) with n <= 64 fits in
// 64 bits, and the running product stays exact in 128-bit intermediates.
inline std::uint64_t binomial_u64(int n, int k) {
  if (n < 0 || k < 0 || k > n || n > 64)
    throw std::out_of_range("binomial_u64: need 0 <= k <= n <= 64");
  k = std::min(k, n - k);
  unsigned __int128 res = 1;
  for (int i = 1; i <= k; ++i) {
    res = res * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
  }
  return static_cast<std::uint64_t>(res);
}

// Arbitrary-precision binomial coefficient, multiplicative formula.
inline bigint binomial_big(int n, int k) {
  if (n < 0 || k < 0 || k > n)
    throw std::out_of_range("binomial_big: need 0 <= k <= n");
  k = std::min(k, n - k);
  bigint res = 1;
  for (int i = 1; i <= k; ++i) {
    res *= n - k + i;
    res /= i;
  }
  return res;
}

inline double log_binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n)
    throw std::out_of_range("log_binomial: need 0 <= k <= n");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace coinforge
