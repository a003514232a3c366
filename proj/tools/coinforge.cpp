#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coinforge/harness.hpp"

namespace {

using coinforge::harness::TestReport;

std::string csv_companion(const std::string& out_path, const std::string& suffix) {
  std::string stem = out_path;
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
    stem = stem.substr(0, stem.size() - 5);
  return stem + suffix;
}

void emit_report(TestReport report, const std::string& out_path, bool with_timestamp) {
  if (with_timestamp) report.timestamp = coinforge::harness::utc_timestamp();
  const std::string body = report.to_json().dump(2) + "\n";
  if (out_path.empty())
    std::cout << body;
  else
    coinforge::harness::write_text_file(out_path, body);
  for (const auto& c : report.checks) {
    std::cerr << (c.pass ? "ok   " : "FAIL ") << c.name
              << "  observed=" << coinforge::harness::format_double(c.observed)
              << (c.kind == "ks" ? "  critical=" : "  expected=")
              << coinforge::harness::format_double(c.expected) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coinforge: sequential samplers for events of unknown probability"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key=value file");

  std::uint64_t seed = 20260815;
  std::uint64_t reps = 100000;
  double sigma = 3.0;
  std::string out_path;
  bool no_timestamp = false;
  app.add_option("--seed", seed, "root seed for all substreams")
      ->envname("COINFORGE_SEED");
  app.add_option("--reps", reps, "replications (coin) or samples (sde)");
  app.add_option("--sigma", sigma, "sigma multiplier for frequency checks");
  app.add_option("--out", out_path,
                 "write the JSON report here (per-run CSVs appear alongside); "
                 "default is stdout with no CSV");
  app.add_flag("--no-timestamp", no_timestamp,
               "suppress the timestamp field for byte-reproducible reports");

  auto* coin = app.add_subcommand("coin", "run a coin target and check its frequency");
  coinforge::harness::ExperimentConfig coin_cfg;
  coin->add_option("--target", coin_cfg.target,
                   "one of alg1, alg2, alg3-alt-exp, alg4-envelope")
      ->required();
  coin->add_option("--s", coin_cfg.s, "limit value for alg1/alg2");
  coin->add_option("--a", coin_cfg.a, "exponential rate for alg3-alt-exp");
  coin->add_option("--p", coin_cfg.p, "input coin probability");
  coin->add_option("--envelope", coin_cfg.envelope,
                   "builtin envelope (p2, identity) or coefficient file");
  coin->add_option("--max-steps", coin_cfg.max_steps, "iteration guard per run");

  auto* validate =
      app.add_subcommand("validate-envelope", "check envelope coefficient conditions");
  coinforge::harness::ValidateConfig val_cfg;
  validate->add_option("source", val_cfg.source,
                       "builtin envelope (p2, identity) or coefficient file")
      ->required();
  validate->add_option("--n-max", val_cfg.n_max, "largest degree to examine");
  validate->add_option("--grid-points", val_cfg.grid_points,
                       "grid resolution for the gap monitor");

  auto* sde = app.add_subcommand("sde", "exact diffusion endpoint sampling");
  coinforge::harness::SdeConfig sde_cfg;
  sde->add_option("--preset", sde_cfg.preset, "drift preset: zero or sine");
  sde->add_option("--T", sde_cfg.horizon, "time horizon");
  sde->add_option("--x", sde_cfg.start, "start value");
  sde->add_flag("--segment", sde_cfg.segment,
                "split the horizon so range * piece stays below 1");
  sde->add_option("--em-step", sde_cfg.em_step, "reference discretization step");
  sde->add_flag("--ks", sde_cfg.compare_reference,
                "KS-compare against the discretized reference simulator");
  sde->add_option("--margin", sde_cfg.margin, "segment load margin in (0,1)");

  auto* selftest =
      app.add_subcommand("selftest", "deterministic cross-module battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    TestReport report;
    if (coin->parsed()) {
      coin_cfg.seed = seed;
      coin_cfg.replications = reps;
      coin_cfg.sigma = sigma;
      const auto result = coinforge::harness::run_coin_experiment(coin_cfg);
      if (!out_path.empty())
        coinforge::harness::write_runs_csv(result.runs,
                                           csv_companion(out_path, ".runs.csv"));
      report = result.report;
    } else if (validate->parsed()) {
      val_cfg.sigma = sigma;
      report = coinforge::harness::run_validate_envelope(val_cfg);
    } else if (sde->parsed()) {
      sde_cfg.seed = seed;
      sde_cfg.samples = reps;
      sde_cfg.sigma = sigma;
      const auto result = coinforge::harness::run_sde_experiment(sde_cfg);
      if (!out_path.empty())
        coinforge::harness::write_samples_csv(result.rows,
                                              csv_companion(out_path, ".samples.csv"));
      report = result.report;
    } else if (selftest->parsed()) {
      report = coinforge::harness::run_selftest(seed, sigma);
    }
    const bool pass = report.all_pass();
    emit_report(std::move(report), out_path, !no_timestamp);
    return pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
