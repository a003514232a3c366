#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coinforge/binomial.hpp"
#include "coinforge/errors.hpp"
#include "coinforge/martingale.hpp"
#include "coinforge/random.hpp"

namespace coinforge {

// Mean of row(i) when i is the number of marked items in a subsample of size
// m drawn without replacement from n items of which k are marked. The m=n-1
// case collapses to two terms. For n <= 64 the weights come from exact 64-bit
// binomials; beyond that they are built by the pmf ratio recurrence from the
// modal index and normalized, which avoids both overflow and the noise of
// log-gamma differences.
template <class RowFn>
double hypergeometric_row_mean(RowFn&& row, int m, int n, int k) {
  if (!(m >= 1 && m < n && k >= 0 && k <= n))
    throw std::out_of_range("hypergeometric_row_mean: need 1 <= m < n, 0 <= k <= n");
  if (m == n - 1) {
    double acc = 0.0;
    if (k >= 1) acc += (static_cast<double>(k) / n) * row(k - 1);
    if (k <= m) acc += (static_cast<double>(n - k) / n) * row(k);
    return acc;
  }
  const int lo = std::max(0, k - (n - m));
  const int hi = std::min(m, k);
  if (n <= 64) {
    const double denom = static_cast<double>(binomial_u64(n, k));
    double acc = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = static_cast<double>(binomial_u64(n - m, k - i)) *
                       static_cast<double>(binomial_u64(m, i)) / denom;
      acc += w * row(i);
    }
    return acc;
  }
  int mode = static_cast<int>((static_cast<double>(m) + 1.0) * (k + 1.0) / (n + 2.0));
  mode = std::clamp(mode, lo, hi);
  // w(i+1)/w(i) = (m-i)/(i+1) * (k-i)/(n-m-k+i+1)
  const auto up_ratio = [&](int i) {
    return (static_cast<double>(m - i) / (i + 1.0)) *
           (static_cast<double>(k - i) / (n - m - k + i + 1.0));
  };
  double total = 1.0;
  double acc = row(mode);
  double w = 1.0;
  for (int i = mode; i < hi; ++i) {
    w *= up_ratio(i);
    total += w;
    acc += w * row(i + 1);
  }
  w = 1.0;
  for (int i = mode; i > lo; --i) {
    w /= up_ratio(i - 1);
    total += w;
    acc += w * row(i - 1);
  }
  return acc / total;
}

// Same mean with exact rational arithmetic; the validator's workhorse.
template <class RowFn>
rational hypergeometric_row_mean_exact(RowFn&& row, int m, int n, int k) {
  if (!(m >= 1 && m < n && k >= 0 && k <= n))
    throw std::out_of_range("hypergeometric_row_mean_exact: index out of range");
  const int lo = std::max(0, k - (n - m));
  const int hi = std::min(m, k);
  rational acc = 0;
  for (int i = lo; i <= hi; ++i)
    acc += rational(binomial_big(n - m, k - i) * binomial_big(m, i)) * row(i);
  return acc / rational(binomial_big(n, k));
}

// Bernstein-form polynomial value sum_k C(n,k) row[k] p^k (1-p)^(n-k),
// evaluated with normalized log-space weights so large degrees neither
// overflow nor underflow.
inline double bernstein_eval(const std::vector<double>& row, double p) {
  const int n = static_cast<int>(row.size()) - 1;
  if (n < 0) throw std::invalid_argument("bernstein_eval: empty row");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::out_of_range("bernstein_eval: p must lie in [0,1]");
  if (p == 0.0) return row.front();
  if (p == 1.0) return row.back();
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  std::vector<double> logw(row.size());
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    logw[k] = log_binomial(n, k) + k * lp + (n - k) * lq;
    top = std::max(top, logw[k]);
  }
  double total = 0.0, acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = std::exp(logw[k] - top);
    total += w;
    acc += w * row[k];
  }
  return acc / total;
}

// Provider of envelope coefficient rows: a lower row and an upper row per
// polynomial degree, exposed as exact rationals, plus the degree schedule a
// factory run should follow. target() is the limit function when known
// (validation and harness checks only; samplers never see it).
class EnvelopeCoefficients {
 public:
  virtual ~EnvelopeCoefficients() = default;

  virtual std::string name() const = 0;
  virtual rational lower_coeff(int n, int k) const = 0;
  virtual rational upper_coeff(int n, int k) const = 0;
  virtual int first_degree() const = 0;
  // next scheduled degree after n; 0 when the schedule is exhausted
  virtual int next_degree(int n) const = 0;
  virtual double target(double /*p*/) const {
    return std::numeric_limits<double>::quiet_NaN();
  }

  // Degrees the validator should examine. Defaults to the run schedule;
  // closed-form envelopes defined at every degree override this with the
  // full range, which makes the validation strictly stronger.
  virtual std::vector<int> validation_degrees(int n_max) const {
    std::vector<int> out;
    for (int n = first_degree(); n != 0 && n <= n_max; n = next_degree(n))
      out.push_back(n);
    return out;
  }

  double lower_value(int n, int k) const {
    return lower_coeff(n, k).convert_to<double>();
  }
  double upper_value(int n, int k) const {
    return upper_coeff(n, k).convert_to<double>();
  }

  std::vector<double> lower_row(int n) const {
    std::vector<double> row(n + 1);
    for (int k = 0; k <= n; ++k) row[k] = lower_value(n, k);
    return row;
  }
  std::vector<double> upper_row(int n) const {
    std::vector<double> row(n + 1);
    for (int k = 0; k <= n; ++k) row[k] = upper_value(n, k);
    return row;
  }
};

namespace detail {

inline int doubled_degree(int n) { return n <= (1 << 29) ? 2 * n : 0; }

inline std::vector<int> all_degrees(int n_max) {
  std::vector<int> out;
  for (int n = 1; n <= n_max; ++n) out.push_back(n);
  return out;
}

}  // namespace detail

// Envelope for the square function: lower row k(k-1)/(n(n-1)) (zero at
// degree 1), upper row (k/n)^2. The lower row is chosen so that subsampling
// leaves its mean unchanged; the upper row exceeds the square by exactly the
// binomial variance term, so the gap at p is p(1-p)/n.
class SquareEnvelope final : public EnvelopeCoefficients {
 public:
  std::string name() const override { return "p2"; }

  rational lower_coeff(int n, int k) const override {
    check(n, k);
    if (n < 2) return rational(0);
    return rational(static_cast<std::int64_t>(k) * (k - 1),
                    static_cast<std::int64_t>(n) * (n - 1));
  }

  rational upper_coeff(int n, int k) const override {
    check(n, k);
    return rational(static_cast<std::int64_t>(k) * k,
                    static_cast<std::int64_t>(n) * n);
  }

  int first_degree() const override { return 1; }
  int next_degree(int n) const override { return detail::doubled_degree(n); }
  double target(double p) const override { return p * p; }

  std::vector<int> validation_degrees(int n_max) const override {
    return detail::all_degrees(n_max);
  }

 private:
  static void check(int n, int k) {
    if (n < 1 || k < 0 || k > n)
      throw std::out_of_range("SquareEnvelope: coefficient index out of range");
  }
};

// Degenerate envelope for the identity function: both rows k/n. Lower and
// upper polynomials coincide at every degree, so a factory run always stops
// at the first step.
class IdentityEnvelope final : public EnvelopeCoefficients {
 public:
  std::string name() const override { return "identity"; }

  rational lower_coeff(int n, int k) const override {
    check(n, k);
    return rational(k, n);
  }
  rational upper_coeff(int n, int k) const override { return lower_coeff(n, k); }

  int first_degree() const override { return 1; }
  int next_degree(int n) const override { return detail::doubled_degree(n); }
  double target(double p) const override { return p; }

  std::vector<int> validation_degrees(int n_max) const override {
    return detail::all_degrees(n_max);
  }

 private:
  static void check(int n, int k) {
    if (n < 1 || k < 0 || k > n)
      throw std::out_of_range("IdentityEnvelope: coefficient index out of range");
  }
};

struct envelope_parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "p/q", plain integer, or fixed-point decimal.
inline rational parse_rational(const std::string& tok) {
  if (tok.empty()) throw std::invalid_argument("empty rational token");
  const auto bad = [&] {
    return std::invalid_argument("cannot parse rational '" + tok + "'");
  };
  const auto parse_int = [&](const std::string& s) -> bigint {
    if (s.empty()) throw bad();
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) throw bad();
    for (; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) throw bad();
    return bigint(s);
  };
  if (const auto slash = tok.find('/'); slash != std::string::npos) {
    const bigint num = parse_int(tok.substr(0, slash));
    const bigint den = parse_int(tok.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + tok + "'");
    return rational(num, den);
  }
  if (const auto dot = tok.find('.'); dot != std::string::npos) {
    const std::string head = tok.substr(0, dot);
    const std::string frac = tok.substr(dot + 1);
    if (frac.empty()) throw bad();
    for (char c : frac)
      if (!std::isdigit(static_cast<unsigned char>(c))) throw bad();
    const bool neg = !head.empty() && head[0] == '-';
    bigint scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const bigint whole = head.empty() || head == "+" || head == "-"
                             ? bigint(0)
                             : parse_int(head);
    bigint num = abs(whole) * scale + bigint(frac);
    if (neg) num = -num;
    return rational(num, scale);
  }
  return rational(parse_int(tok), bigint(1));
}

// Coefficients loaded from a plain-text table. Format: comment lines start
// with '#'; the first data line declares the degree schedule
// ("schedule: 1 2 4 8"); every following line is one record "n k a b" with
// a and b given as decimals or p/q rationals. Every scheduled degree must
// be fully covered.
class FileEnvelope final : public EnvelopeCoefficients {
 public:
  explicit FileEnvelope(const std::string& path) : name_(stem(path)) {
    std::ifstream in(path);
    if (!in) throw envelope_parse_error(path + ": cannot open");
    std::string line;
    std::size_t lineno = 0;
    const auto fail = [&](const std::string& what) {
      throw envelope_parse_error(path + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream fields(line);
      if (schedule_.empty()) {
        std::string tag;
        fields >> tag;
        if (tag != "schedule:") fail("expected 'schedule:' header before records");
        int d;
        while (fields >> d) {
          if (d < 1) fail("schedule degrees must be positive");
          if (!schedule_.empty() && d <= schedule_.back())
            fail("schedule degrees must be strictly increasing");
          schedule_.push_back(d);
        }
        if (!fields.eof()) fail("schedule entries must be integers");
        if (schedule_.empty()) fail("schedule is empty");
        continue;
      }
      int n, k;
      std::string a_tok, b_tok, extra;
      if (!(fields >> n >> k >> a_tok >> b_tok)) fail("expected record 'n k a b'");
      if (fields >> extra) fail("trailing field '" + extra + "'");
      if (std::find(schedule_.begin(), schedule_.end(), n) == schedule_.end())
        fail("degree " + std::to_string(n) + " is not in the schedule");
      if (k < 0 || k > n) fail("k out of range for degree " + std::to_string(n));
      auto& row = rows_[n];
      auto& seen = seen_[n];
      row.resize(n + 1);
      seen.resize(n + 1, false);
      if (seen[k]) fail("duplicate record for (n,k)");
      try {
        row[k] = {parse_rational(a_tok), parse_rational(b_tok)};
        seen[k] = true;
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    }
    if (schedule_.empty())
      throw envelope_parse_error(path + ": no schedule header found");
    for (int d : schedule_) {
      const auto it = seen_.find(d);
      if (it == seen_.end())
        throw envelope_parse_error(path + ": no records for scheduled degree " +
                                   std::to_string(d));
      for (int k = 0; k <= d; ++k)
        if (!it->second[k])
          throw envelope_parse_error(path + ": missing record for n=" +
                                     std::to_string(d) + " k=" + std::to_string(k));
    }
    seen_.clear();
  }

  std::string name() const override { return name_; }

  rational lower_coeff(int n, int k) const override { return fetch(n, k).first; }
  rational upper_coeff(int n, int k) const override { return fetch(n, k).second; }

  int first_degree() const override { return schedule_.front(); }

  int next_degree(int n) const override {
    const auto it = std::find(schedule_.begin(), schedule_.end(), n);
    if (it == schedule_.end() || it + 1 == schedule_.end()) return 0;
    return *(it + 1);
  }

  const std::vector<int>& schedule() const { return schedule_; }

 private:
  static std::string stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
  }

  const std::pair<rational, rational>& fetch(int n, int k) const {
    const auto it = rows_.find(n);
    if (it == rows_.end() || k < 0 || k > n)
      throw std::out_of_range("FileEnvelope: no coefficient for requested (n,k)");
    return it->second[k];
  }

  std::string name_;
  std::vector<int> schedule_;
  std::map<int, std::vector<std::pair<rational, rational>>> rows_;
  std::map<int, std::vector<char>> seen_;  // parse-time bookkeeping only
};

// Writes a coefficient table in the format FileEnvelope reads.
inline void write_envelope_file(const EnvelopeCoefficients& env,
                                const std::vector<int>& schedule,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# envelope coefficient table: " << env.name() << "\n";
  out << "schedule:";
  for (int d : schedule) out << ' ' << d;
  out << "\n";
  for (int d : schedule)
    for (int k = 0; k <= d; ++k)
      out << d << ' ' << k << ' ' << env.lower_coeff(d, k) << ' '
          << env.upper_coeff(d, k) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

struct EnvelopeViolation {
  std::string condition;  // "order" or "mean"
  int m = 0;              // 0 for order violations
  int n = 0;
  int k = 0;
  std::string detail;
};

struct GapSample {
  int degree = 0;
  double sup_gap = 0.0;
  double argmax_p = 0.0;
};

struct EnvelopeReport {
  std::string envelope;
  int n_max = 0;
  bool exact = true;  // every mean check ran in exact rational arithmetic
  std::vector<EnvelopeViolation> violations;
  std::vector<GapSample> gaps;

  bool pass() const { return violations.empty(); }
};

// Checks the two envelope conditions on every validation degree up to n_max:
// coefficient ordering 0 <= a <= b <= 1 per (n,k), and for every degree pair
// m < n the subsampled row means must bracket the coarser row from the right
// side (lower mean <= lower coefficient, upper mean >= upper coefficient).
// Rational arithmetic keeps the mean checks exact up to degree 64; past that
// they fall back to doubles with the given tolerance. The upper-lower
// polynomial gap is evaluated on the grid per degree as a convergence
// monitor; shrinking gaps are reported, never "verified".
inline EnvelopeReport validate_envelope(const EnvelopeCoefficients& env, int n_max,
                                        const std::vector<double>& grid,
                                        double tol = kMonotoneTol) {
  EnvelopeReport report;
  report.envelope = env.name();
  report.n_max = n_max;
  const std::vector<int> degrees = env.validation_degrees(n_max);

  for (int n : degrees) {
    for (int k = 0; k <= n; ++k) {
      const rational a = env.lower_coeff(n, k);
      const rational b = env.upper_coeff(n, k);
      if (a < 0 || a > b || b > 1)
        report.violations.push_back(
            {"order", 0, n, k, "need 0 <= a <= b <= 1"});
    }
  }

  for (std::size_t ni = 0; ni < degrees.size(); ++ni) {
    const int n = degrees[ni];
    for (std::size_t mi = 0; mi < ni; ++mi) {
      const int m = degrees[mi];
      const bool use_exact = n <= 64;
      if (!use_exact) report.exact = false;
      for (int k = 0; k <= n; ++k) {
        if (use_exact) {
          const rational mean_a = hypergeometric_row_mean_exact(
              [&](int i) { return env.lower_coeff(m, i); }, m, n, k);
          const rational mean_b = hypergeometric_row_mean_exact(
              [&](int i) { return env.upper_coeff(m, i); }, m, n, k);
          if (mean_a > env.lower_coeff(n, k))
            report.violations.push_back(
                {"mean", m, n, k, "lower-row mean exceeds lower coefficient"});
          if (mean_b < env.upper_coeff(n, k))
            report.violations.push_back(
                {"mean", m, n, k, "upper-row mean below upper coefficient"});
        } else {
          const double mean_a = hypergeometric_row_mean(
              [&](int i) { return env.lower_value(m, i); }, m, n, k);
          const double mean_b = hypergeometric_row_mean(
              [&](int i) { return env.upper_value(m, i); }, m, n, k);
          if (mean_a > env.lower_value(n, k) + tol)
            report.violations.push_back(
                {"mean", m, n, k, "lower-row mean exceeds lower coefficient"});
          if (mean_b < env.upper_value(n, k) - tol)
            report.violations.push_back(
                {"mean", m, n, k, "upper-row mean below upper coefficient"});
        }
      }
    }
  }

  for (int n : degrees) {
    const std::vector<double> lo = env.lower_row(n);
    const std::vector<double> hi = env.upper_row(n);
    GapSample g{n, -std::numeric_limits<double>::infinity(), 0.0};
    for (double p : grid) {
      const double gap = bernstein_eval(hi, p) - bernstein_eval(lo, p);
      if (gap > g.sup_gap) {
        g.sup_gap = gap;
        g.argmax_p = p;
      }
    }
    if (!grid.empty()) report.gaps.push_back(g);
  }
  return report;
}

inline std::vector<double> default_validation_grid(int points = 39) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = static_cast<double>(i + 1) / (points + 1);
  return grid;
}

// Bound stream backed by an envelope and a p-coin: each step advances the
// toss count to the next scheduled degree, then reads the coefficient rows
// at the current heads count. The conditional means of the previous step's
// bounds are hypergeometric row means, because given the heads count at
// degree n the heads seen at an earlier degree m are a size-m subsample
// without replacement.
template <CoinLike Coin>
class EnvelopeBoundStream {
 public:
  EnvelopeBoundStream(const EnvelopeCoefficients& env, Coin& coin)
      : env_(&env), coin_(&coin), next_degree_(env.first_degree()) {
    if (next_degree_ < 1)
      throw contract_violation("EnvelopeBoundStream: envelope declares no degrees");
    base_coins_ = coin.consumed();
  }

  BoundStep next() {
    const int m = degree_;
    const int n = next_degree_;
    if (n == 0)
      throw did_not_converge("EnvelopeBoundStream: degree schedule exhausted");
    while (tosses_ < n) {
      const double x = static_cast<double>(coin_->toss());
      if (x != 0.0 && x != 1.0)
        throw contract_violation("EnvelopeBoundStream: coin must produce bits");
      heads_ += static_cast<int>(x);
      ++tosses_;
    }
    BoundStep step;
    step.lower = env_->lower_value(n, heads_);
    step.upper = env_->upper_value(n, heads_);
    if (m == 0) {
      step.prev_lower_mean = 0.0;
      step.prev_upper_mean = 1.0;
    } else {
      step.prev_lower_mean = hypergeometric_row_mean(
          [&](int i) { return env_->lower_value(m, i); }, m, n, heads_);
      step.prev_upper_mean = hypergeometric_row_mean(
          [&](int i) { return env_->upper_value(m, i); }, m, n, heads_);
    }
    degree_ = n;
    next_degree_ = env_->next_degree(n);
    return step;
  }

  std::uint64_t coins() const { return coin_->consumed() - base_coins_; }
  int tosses() const { return tosses_; }
  int heads() const { return heads_; }

 private:
  const EnvelopeCoefficients* env_;
  Coin* coin_;
  int degree_ = 0;
  int next_degree_ = 1;
  int tosses_ = 0;
  int heads_ = 0;
  std::uint64_t base_coins_ = 0;
};

// One factory run: drive the martingale coin with an envelope stream.
template <CoinLike Coin>
CoinResult factory_coin(const EnvelopeCoefficients& env, Coin& coin,
                        UniformSource& src,
                        std::uint64_t max_steps = kDefaultMaxSteps) {
  EnvelopeBoundStream<Coin> stream(env, coin);
  return martingale_coin(stream, src, max_steps);
}

}  // namespace coinforge
