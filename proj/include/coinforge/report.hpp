#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coinforge/stats.hpp"

namespace coinforge::harness {

using ordered_json = nlohmann::ordered_json;

// One verification record. For frequency-style checks `stderr_est` is the
// standard error and pass means |observed - expected| <= sigma * stderr_est;
// for KS-style checks `expected` carries the critical value and pass means
// observed <= expected.
struct CheckRecord {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double stderr_est = 0.0;
  bool pass = false;
  std::string kind = "frequency";  // "frequency", "ks", "count", "bound"
};

inline CheckRecord frequency_check(std::string name, double observed,
                                   double expected, double stderr_est,
                                   double sigma) {
  const bool pass = std::abs(observed - expected) <= sigma * stderr_est;
  return {std::move(name), observed, expected, stderr_est, pass, "frequency"};
}

// Binomial frequency check from a success count.
inline CheckRecord proportion_check(std::string name, double successes,
                                    std::uint64_t reps, double expected,
                                    double sigma) {
  const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(reps));
  return frequency_check(std::move(name), successes / static_cast<double>(reps),
                         expected, se, sigma);
}

inline CheckRecord ks_check(std::string name, double statistic, double critical) {
  return {std::move(name), statistic, critical, 0.0, statistic <= critical, "ks"};
}

// One-sided bound: pass when observed <= limit.
inline CheckRecord bound_check(std::string name, double observed, double limit) {
  return {std::move(name), observed, limit, 0.0, observed <= limit, "bound"};
}

inline CheckRecord count_check(std::string name, double observed, double expected) {
  return {std::move(name), observed, expected, 0.0, observed == expected, "count"};
}

struct SummaryStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

inline SummaryStats summarize(std::vector<double> xs) {
  SummaryStats s;
  if (xs.empty()) return s;
  double total = 0.0;
  for (double x : xs) {
    total += x;
    s.max = std::max(s.max, x);
  }
  s.mean = total / static_cast<double>(xs.size());
  s.p50 = quantile(xs, 0.50);
  s.p90 = quantile(xs, 0.90);
  s.p99 = quantile(xs, 0.99);
  return s;
}

struct TestReport {
  std::string name;
  std::uint64_t seed = 0;
  std::uint64_t replications = 0;
  double sigma = 3.0;
  std::string timestamp;  // empty = suppressed
  std::vector<CheckRecord> checks;
  std::vector<std::pair<std::string, SummaryStats>> consumption;
  std::vector<std::string> notes;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["report"] = name;
    j["seed"] = seed;
    j["replications"] = replications;
    j["sigma"] = sigma;
    if (!timestamp.empty()) j["timestamp"] = timestamp;
    j["checks"] = ordered_json::array();
    for (const auto& c : checks) {
      ordered_json jc;
      jc["name"] = c.name;
      jc["kind"] = c.kind;
      jc["observed"] = c.observed;
      if (c.kind == "ks")
        jc["critical"] = c.expected;
      else
        jc["expected"] = c.expected;
      if (c.kind == "frequency") jc["stderr"] = c.stderr_est;
      jc["pass"] = c.pass;
      j["checks"].push_back(jc);
    }
    if (!consumption.empty()) {
      ordered_json jc;
      for (const auto& [label, s] : consumption) {
        jc[label] = {{"mean", s.mean}, {"p50", s.p50},   {"p90", s.p90},
                     {"p99", s.p99},   {"max", s.max}};
      }
      j["consumption"] = jc;
    }
    if (!notes.empty()) j["notes"] = notes;
    j["all_pass"] = all_pass();
    return j;
  }
};

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline void write_report(const TestReport& report, const std::string& path) {
  write_text_file(path, report.to_json().dump(2) + "\n");
}

}  // namespace coinforge::harness
