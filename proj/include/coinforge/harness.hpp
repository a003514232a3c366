#pragma once

#include <cmath>
#include <cstdint>
#include <ctime>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "coinforge/alternating.hpp"
#include "coinforge/diffusion.hpp"
#include "coinforge/envelope.hpp"
#include "coinforge/euler_maruyama.hpp"
#include "coinforge/martingale.hpp"
#include "coinforge/random.hpp"
#include "coinforge/report.hpp"
#include "coinforge/stats.hpp"

namespace coinforge::harness {

inline std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Deterministic shortest-round-trip formatting for report text and CSV.
inline std::string format_double(double x) { return ordered_json(x).dump(); }

inline CheckRecord variance_check(std::string name, double observed,
                                  double expected, std::uint64_t n, double sigma) {
  const double se = expected * std::sqrt(2.0 / static_cast<double>(n));
  return frequency_check(std::move(name), observed, expected, se, sigma);
}

inline std::unique_ptr<EnvelopeCoefficients> make_envelope(const std::string& source) {
  if (source == "p2") return std::make_unique<SquareEnvelope>();
  if (source == "identity") return std::make_unique<IdentityEnvelope>();
  return std::make_unique<FileEnvelope>(source);
}

inline DiffusionSpec make_drift_preset(const std::string& name, double start,
                                       double horizon) {
  if (name == "zero") return zero_drift_spec(start, horizon);
  if (name == "sine") return sine_drift_spec(start, horizon);
  throw std::invalid_argument("unknown drift preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// coin experiments

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::uint64_t replications = 100000;
  double sigma = 3.0;
  std::string target = "alg3-alt-exp";  // alg1 | alg2 | alg3-alt-exp | alg4-envelope
  double s = 0.7;                       // limit value for alg1 / alg2
  double a = 0.5;                       // exponential rate for alg3-alt-exp
  double p = 0.3;                       // input coin probability
  std::string envelope = "p2";          // builtin name or file path
  std::uint64_t max_steps = kDefaultMaxSteps;
};

struct CoinExperiment {
  TestReport report;
  std::vector<CoinResult> runs;
};

inline CoinExperiment run_coin_experiment(const ExperimentConfig& cfg) {
  if (cfg.replications < 1)
    throw std::invalid_argument("replications must be at least 1");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");

  std::unique_ptr<EnvelopeCoefficients> env;
  double expected = std::numeric_limits<double>::quiet_NaN();
  std::string note;
  if (cfg.target == "alg1" || cfg.target == "alg2") {
    if (!(cfg.s >= 0.0 && cfg.s <= 1.0))
      throw std::invalid_argument("target value s must lie in [0,1]");
    expected = cfg.s;
    note = "s=" + format_double(cfg.s);
  } else if (cfg.target == "alg3-alt-exp") {
    expected = std::exp(-cfg.a * cfg.p);
    note = "a=" + format_double(cfg.a) + " p=" + format_double(cfg.p);
  } else if (cfg.target == "alg4-envelope") {
    env = make_envelope(cfg.envelope);
    expected = env->target(cfg.p);
    note = "envelope=" + env->name() + " p=" + format_double(cfg.p);
  } else {
    throw std::invalid_argument("unknown target '" + cfg.target +
                                "' (expected alg1, alg2, alg3-alt-exp, alg4-envelope)");
  }

  const UniformSource root(cfg.seed);
  CoinExperiment out;
  out.runs.reserve(cfg.replications);
  double successes = 0.0;
  std::vector<double> iters, coins, uniforms;
  iters.reserve(cfg.replications);
  coins.reserve(cfg.replications);
  uniforms.reserve(cfg.replications);

  for (std::uint64_t i = 0; i < cfg.replications; ++i) {
    const UniformSource rep = root.split(i);
    UniformSource decision = rep.split(0);
    UniformSource coin_src = rep.split(1);
    CoinResult r;
    if (cfg.target == "alg1") {
      r = estimator_coin([&](UniformSource&) { return cfg.s; }, decision);
    } else if (cfg.target == "alg2") {
      r = interval_coin([&](std::uint64_t n) { return cfg.s - 1.0 / (n + 1.0); },
                        [&](std::uint64_t n) { return cfg.s + 1.0 / (n + 1.0); },
                        decision, cfg.max_steps);
    } else if (cfg.target == "alg3-alt-exp") {
      BernoulliCoin coin(cfg.p, coin_src);
      r = exponential_coin(cfg.a, coin, decision, cfg.max_steps);
    } else {
      BernoulliCoin coin(cfg.p, coin_src);
      r = factory_coin(*env, coin, decision, cfg.max_steps);
    }
    successes += r.value;
    iters.push_back(static_cast<double>(r.iterations));
    coins.push_back(static_cast<double>(r.coins_consumed));
    uniforms.push_back(static_cast<double>(r.uniforms_consumed));
    out.runs.push_back(r);
  }

  TestReport& rep = out.report;
  rep.name = "coin:" + cfg.target;
  rep.seed = cfg.seed;
  rep.replications = cfg.replications;
  rep.sigma = cfg.sigma;
  rep.notes.push_back(note);
  if (cfg.replications < 2) {
    rep.notes.push_back("insufficient replications for frequency checks");
  } else if (std::isnan(expected)) {
    rep.notes.push_back("target limit unknown for this envelope; frequency check skipped");
  } else {
    rep.checks.push_back(proportion_check("success frequency", successes,
                                          cfg.replications, expected, cfg.sigma));
  }
  rep.consumption.emplace_back("iterations", summarize(iters));
  rep.consumption.emplace_back("coins", summarize(coins));
  rep.consumption.emplace_back("uniforms", summarize(uniforms));
  return out;
}

inline void write_runs_csv(const std::vector<CoinResult>& runs,
                           const std::string& path) {
  std::string body = "value,iterations,coins,uniforms\n";
  for (const CoinResult& r : runs) {
    body += std::to_string(r.value) + ',' + std::to_string(r.iterations) + ',' +
            std::to_string(r.coins_consumed) + ',' +
            std::to_string(r.uniforms_consumed) + '\n';
  }
  write_text_file(path, body);
}

// ---------------------------------------------------------------------------
// envelope validation

struct ValidateConfig {
  std::string source = "p2";  // builtin name or file path
  int n_max = 30;
  int grid_points = 39;
  double sigma = 3.0;
};

inline TestReport run_validate_envelope(const ValidateConfig& cfg) {
  const auto env = make_envelope(cfg.source);
  const EnvelopeReport result =
      validate_envelope(*env, cfg.n_max, default_validation_grid(cfg.grid_points));
  TestReport rep;
  rep.name = "validate-envelope:" + env->name();
  rep.sigma = cfg.sigma;
  rep.checks.push_back(count_check("condition violations",
                                   static_cast<double>(result.violations.size()), 0.0));
  rep.notes.push_back(result.exact ? "mean checks ran in exact rational arithmetic"
                                   : "mean checks above degree 64 used doubles");
  std::size_t shown = 0;
  for (const auto& v : result.violations) {
    if (++shown > 10) {
      rep.notes.push_back("... further violations suppressed");
      break;
    }
    rep.notes.push_back("violation [" + v.condition + "] m=" + std::to_string(v.m) +
                        " n=" + std::to_string(v.n) + " k=" + std::to_string(v.k) +
                        ": " + v.detail);
  }
  for (const auto& g : result.gaps)
    rep.notes.push_back("degree " + std::to_string(g.degree) + ": sup gap " +
                        format_double(g.sup_gap) + " at p=" +
                        format_double(g.argmax_p));
  return rep;
}

// ---------------------------------------------------------------------------
// diffusion experiments

struct SdeConfig {
  std::uint64_t seed = 0;
  std::string preset = "zero";  // zero | sine
  double horizon = 1.0;
  double start = 0.0;
  std::uint64_t samples = 10000;
  bool segment = false;
  double em_step = 1e-4;
  bool compare_reference = false;
  double sigma = 3.0;
  double margin = 0.9;
};

struct SdeSampleRow {
  double value = 0.0;
  std::uint64_t segments = 1;
  std::uint64_t proposals = 0;
  std::uint64_t intensity_coins = 0;
  std::uint64_t bridge_points = 0;
  std::uint64_t uniforms = 0;
};

struct SdeExperiment {
  TestReport report;
  std::vector<SdeSampleRow> rows;
};

inline SdeExperiment run_sde_experiment(const SdeConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("samples must be at least 1");
  DiffusionSpec spec = make_drift_preset(cfg.preset, cfg.start, cfg.horizon);
  validate_spec(spec);
  const double load = spec.functional_range * cfg.horizon;
  if (load >= 1.0 && !cfg.segment)
    throw std::invalid_argument(
        "functional_range * horizon = " + format_double(load) +
        " but the acceptance identity requires it below 1; "
        "pass --segment to chain sub-horizon pieces");

  const UniformSource root(cfg.seed);
  SdeExperiment out;
  out.rows.reserve(cfg.samples);
  std::vector<double> values, proposals, jcoins, bridges, uniforms;
  for (std::uint64_t i = 0; i < cfg.samples; ++i) {
    UniformSource src = root.split(i + 1);
    SdeSampleRow row;
    if (cfg.segment) {
      const ChainedSampleResult r =
          sample_chained(spec, cfg.horizon, src, cfg.margin);
      row = {r.value, r.segments, r.proposals, r.intensity_coins, 0,
             r.uniforms_consumed};
    } else {
      const ExactSampleResult r = exact_sample(spec, src);
      row = {r.value, 1, r.proposals, r.intensity_coins, r.bridge_points,
             r.uniforms_consumed};
    }
    out.rows.push_back(row);
    values.push_back(row.value);
    proposals.push_back(static_cast<double>(row.proposals));
    jcoins.push_back(static_cast<double>(row.intensity_coins));
    bridges.push_back(static_cast<double>(row.bridge_points));
    uniforms.push_back(static_cast<double>(row.uniforms));
  }

  TestReport& rep = out.report;
  rep.name = "sde:" + cfg.preset;
  rep.seed = cfg.seed;
  rep.replications = cfg.samples;
  rep.sigma = cfg.sigma;
  rep.notes.push_back("horizon=" + format_double(cfg.horizon) +
                      " start=" + format_double(cfg.start) +
                      (cfg.segment ? " segmented" : ""));

  if (cfg.segment) {
    const auto expected_segments = static_cast<double>(
        segment_horizon(spec, cfg.horizon, cfg.margin).size());
    rep.checks.push_back(count_check("segments per sample",
                                     static_cast<double>(out.rows.front().segments),
                                     expected_segments));
  }

  if (cfg.preset == "zero" && cfg.samples >= 2) {
    // closed-form Gaussian endpoint: mean = start, variance = horizon
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(cfg.samples);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cfg.samples - 1);
    rep.checks.push_back(frequency_check(
        "endpoint mean", mean, cfg.start,
        std::sqrt(cfg.horizon / static_cast<double>(cfg.samples)), cfg.sigma));
    rep.checks.push_back(
        variance_check("endpoint variance", var, cfg.horizon, cfg.samples, cfg.sigma));
  }

  if (cfg.compare_reference && cfg.samples >= 2) {
    UniformSource em_src = root.split(0);
    const std::vector<double> reference =
        euler_maruyama_reference(spec, cfg.em_step, cfg.samples, em_src);
    const double stat = ks_statistic(values, reference);
    const double crit = ks_two_sample_critical(0.01, values.size(), reference.size());
    rep.checks.push_back(
        ks_check("endpoint distribution vs discretized reference", stat, crit));
    rep.notes.push_back("reference step=" + format_double(cfg.em_step));
  }

  rep.consumption.emplace_back("proposals", summarize(proposals));
  rep.consumption.emplace_back("intensity_coins", summarize(jcoins));
  if (!cfg.segment) rep.consumption.emplace_back("bridge_points", summarize(bridges));
  rep.consumption.emplace_back("uniforms", summarize(uniforms));
  return out;
}

inline void write_samples_csv(const std::vector<SdeSampleRow>& rows,
                              const std::string& path) {
  std::string body = "value,segments,proposals,intensity_coins,bridge_points,uniforms\n";
  for (const auto& r : rows) {
    body += format_double(r.value) + ',' + std::to_string(r.segments) + ',' +
            std::to_string(r.proposals) + ',' + std::to_string(r.intensity_coins) +
            ',' + std::to_string(r.bridge_points) + ',' +
            std::to_string(r.uniforms) + '\n';
  }
  write_text_file(path, body);
}

// ---------------------------------------------------------------------------
// selftest

// Deterministic battery across all modules. Every statistical check uses a
// substream derived from the given seed, so the whole report is a pure
// function of (seed, sigma).
inline TestReport run_selftest(std::uint64_t seed, double sigma = 3.0) {
  TestReport rep;
  rep.name = "selftest";
  rep.seed = seed;
  rep.sigma = sigma;
  const UniformSource root(seed);
  const std::uint64_t n = 20000;
  rep.replications = n;

  {  // constant estimator
    const UniformSource sub = root.split(1);
    double succ = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource src = sub.split(i);
      succ += estimator_coin([](UniformSource&) { return 0.7; }, src).value;
    }
    rep.checks.push_back(
        proportion_check("estimator coin, constant 0.7", succ, n, 0.7, sigma));
  }

  {  // interval coin around 0.5
    const UniformSource sub = root.split(2);
    double succ = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource src = sub.split(i);
      succ += interval_coin([](std::uint64_t k) { return 0.5 - 1.0 / (k + 1.0); },
                            [](std::uint64_t k) { return 0.5 + 1.0 / (k + 1.0); },
                            src)
                  .value;
    }
    rep.checks.push_back(
        proportion_check("interval coin, harmonic bounds at 0.5", succ, n, 0.5, sigma));
  }

  {  // exponential factory
    const UniformSource sub = root.split(3);
    double succ = 0.0, total_coins = 0.0, total_sq = 0.0, deep = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource rep_src = sub.split(i);
      UniformSource decision = rep_src.split(0);
      UniformSource coin_src = rep_src.split(1);
      BernoulliCoin coin(0.3, coin_src);
      const CoinResult r = exponential_coin(0.5, coin, decision);
      succ += r.value;
      total_coins += static_cast<double>(r.coins_consumed);
      total_sq += static_cast<double>(r.coins_consumed) *
                  static_cast<double>(r.coins_consumed);
      deep += r.coins_consumed > 2;
    }
    rep.checks.push_back(proportion_check("exponential factory, rate 0.5 on 0.3-coin",
                                          succ, n, std::exp(-0.15), sigma));
    // tail after two steps: (rate * p)^2 / 2
    rep.checks.push_back(proportion_check("exponential factory tail beyond 2 tosses",
                                          deep, n, 0.15 * 0.15 / 2.0, sigma));
    const double mean_coins = total_coins / static_cast<double>(n);
    const double sd = std::sqrt((total_sq - total_coins * mean_coins) /
                                static_cast<double>(n - 1));
    rep.checks.push_back(bound_check(
        "exponential factory mean tosses <= e", mean_coins,
        std::exp(1.0) + sigma * sd / std::sqrt(static_cast<double>(n))));
  }

  std::vector<double> env_iters, env_coins, env_uniforms;
  {  // square envelope factory
    const SquareEnvelope env;
    const UniformSource sub = root.split(4);
    double succ = 0.0, deep = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource rep_src = sub.split(i);
      UniformSource decision = rep_src.split(0);
      UniformSource coin_src = rep_src.split(1);
      BernoulliCoin coin(0.4, coin_src);
      const CoinResult r = factory_coin(env, coin, decision);
      succ += r.value;
      deep += r.coins_consumed > 2;
      env_iters.push_back(static_cast<double>(r.iterations));
      env_coins.push_back(static_cast<double>(r.coins_consumed));
      env_uniforms.push_back(static_cast<double>(r.uniforms_consumed));
    }
    rep.checks.push_back(
        proportion_check("square envelope factory at p=0.4", succ, n, 0.16, sigma));
    // tail law at degree 2: p(1-p)/2
    rep.checks.push_back(proportion_check("square envelope tail beyond 2 tosses",
                                          deep, n, 0.4 * 0.6 / 2.0, sigma));
  }

  {  // unbiased two-point estimator
    const UniformSource sub = root.split(5);
    double total = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource src = sub.split(i);
      DeterministicBoundStream stream([](std::uint64_t) { return 0.2; },
                                      [](std::uint64_t) { return 0.2; }, -1.0, 1.0);
      total += unbiased_estimate(stream, 1.0, src).value;
    }
    // two-point distribution at +-1 with mean 0.2 has variance 0.96
    rep.checks.push_back(frequency_check(
        "unbiased estimate of 0.2 within scale 1", total / static_cast<double>(n),
        0.2, std::sqrt(0.96 / static_cast<double>(n)), sigma));
  }

  {  // envelope validation, exact rational arithmetic
    const auto grid = default_validation_grid();
    const EnvelopeReport square = validate_envelope(SquareEnvelope(), 16, grid);
    rep.checks.push_back(count_check("square envelope violations through degree 16",
                                     static_cast<double>(square.violations.size()),
                                     0.0));
    const EnvelopeReport ident = validate_envelope(IdentityEnvelope(), 16, grid);
    rep.checks.push_back(count_check("identity envelope violations through degree 16",
                                     static_cast<double>(ident.violations.size()),
                                     0.0));
    double worst = 0.0;
    for (const auto& g : ident.gaps) worst = std::max(worst, std::abs(g.sup_gap));
    rep.checks.push_back(bound_check("identity envelope sup gap", worst, 1e-12));
  }

  {  // zero-drift endpoint moments
    const UniformSource sub = root.split(6);
    const DiffusionSpec spec = zero_drift_spec(0.0, 1.0);
    const std::uint64_t m = 2000;
    std::vector<double> xs;
    xs.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) {
      UniformSource src = sub.split(i);
      xs.push_back(exact_sample(spec, src).value);
    }
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m - 1);
    rep.checks.push_back(frequency_check("zero-drift endpoint mean", mean, 0.0,
                                         std::sqrt(1.0 / static_cast<double>(m)),
                                         sigma));
    rep.checks.push_back(variance_check("zero-drift endpoint variance", var, 1.0, m, sigma));
  }

  {  // bridge midpoint conditioning
    const UniformSource sub = root.split(7);
    double mean = 0.0, sq = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      UniformSource src = sub.split(i);
      BridgeSkeleton skel(1.0, 0.0, 0.0);
      const double v = skel.value_at(0.5, src);
      mean += v;
      sq += v * v;
    }
    mean /= static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - mean * mean;
    rep.checks.push_back(frequency_check(
        "bridge midpoint mean", mean, 0.0,
        std::sqrt(0.25 / static_cast<double>(n)), sigma));
    rep.checks.push_back(variance_check("bridge midpoint variance", var, 0.25, n, sigma));
  }

  {  // substream replay
    UniformSource a = root.split(8);
    UniformSource b = root.split(8);
    double mismatches = 0.0;
    for (int i = 0; i < 8; ++i) mismatches += a.next() != b.next();
    rep.checks.push_back(count_check("substream replay mismatches", mismatches, 0.0));
  }

  rep.consumption.emplace_back("envelope_iterations", summarize(env_iters));
  rep.consumption.emplace_back("envelope_coins", summarize(env_coins));
  rep.consumption.emplace_back("envelope_uniforms", summarize(env_uniforms));
  return rep;
}

}  // namespace coinforge::harness
