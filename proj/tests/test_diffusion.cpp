#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "coinforge/diffusion.hpp"
#include "coinforge/euler_maruyama.hpp"
#include "coinforge/random.hpp"
#include "coinforge/stats.hpp"

using namespace coinforge;
using Catch::Approx;

namespace {

template <class F>
double simpson(F&& f, double lo, double hi, int intervals) {
    const double h = (hi - lo) / intervals;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i)
        acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// piecewise-linear CDF from trapezoid prefix sums of the unnormalized density
struct QuadratureCdf {
    std::vector<double> us, cum;
    double operator()(double u) const {
        if (u <= us.front()) return 0.0;
        if (u >= us.back()) return 1.0;
        const auto it = std::upper_bound(us.begin(), us.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - us.begin());
        const double frac = (u - us[i - 1]) / (us[i] - us[i - 1]);
        return cum[i - 1] + frac * (cum[i] - cum[i - 1]);
    }
};

QuadratureCdf endpoint_cdf_oracle(const DiffusionSpec& spec, double lo, double hi,
                                  int n) {
    QuadratureCdf out;
    out.us.resize(n + 1);
    out.cum.assign(n + 1, 0.0);
    std::vector<double> dens(n + 1);
    const double h = (hi - lo) / n;
    const double sd = std::sqrt(spec.horizon);
    for (int i = 0; i <= n; ++i) {
        out.us[i] = lo + i * h;
        const double z = (out.us[i] - spec.start) / sd;
        dens[i] = std::exp(spec.drift_integral(out.us[i]) - 0.5 * z * z);
    }
    for (int i = 1; i <= n; ++i)
        out.cum[i] = out.cum[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * h;
    for (double& c : out.cum) c /= out.cum.back();
    return out;
}

// discretized pinned path: BM increments, then endpoint correction
std::vector<double> dense_bridge(double T, double x, double y, int n_grid,
                                 UniformSource& src) {
    std::vector<double> b(n_grid + 1, 0.0);
    const double dt = T / n_grid;
    for (int i = 1; i <= n_grid; ++i)
        b[i] = b[i - 1] + std::sqrt(dt) * normal_draw(src);
    std::vector<double> w(n_grid + 1);
    for (int i = 0; i <= n_grid; ++i) {
        const double t = i * dt;
        w[i] = x + b[i] - (t / T) * (b[n_grid] - (y - x));
    }
    return w;
}

DiffusionSpec constant_intensity_spec(double level, double horizon) {
    // zero drift with a shifted floor turns the intensity into the constant
    // -floor / range
    DiffusionSpec spec = zero_drift_spec(0.0, horizon);
    spec.name = "flat";
    spec.functional_floor = -level;
    spec.functional_range = 1.0;
    return spec;
}

}  // namespace

TEST_CASE("intensity: presets stay inside the unit interval") {
    const DiffusionSpec zero = zero_drift_spec(0.0, 1.0);
    const DiffusionSpec sine = sine_drift_spec(0.0, 0.5);
    double sine_max = 0.0;
    for (int i = 0; i <= 1600; ++i) {
        const double u = -8.0 + i / 100.0;
        REQUIRE(intensity(zero, u) == 0.0);
        const double phi = intensity(sine, u);
        REQUIRE(phi >= 0.0);
        REQUIRE(phi <= 1.0);
        sine_max = std::max(sine_max, phi);
    }
    // the sine functional actually attains its declared range
    REQUIRE(sine_max > 0.99);
}

TEST_CASE("intensity: frozen sine values") {
    const DiffusionSpec sine = sine_drift_spec(0.0, 0.5);
    REQUIRE(intensity(sine, 0.0) == Approx(8.0 / 9.0).margin(1e-14));
    const double pi = std::acos(-1.0);
    REQUIRE(intensity(sine, pi) == Approx(0.0).margin(1e-9));
}

TEST_CASE("intensity: misdeclared bounds are detected") {
    DiffusionSpec broken = sine_drift_spec(0.0, 0.5);
    broken.functional_floor = 0.0;  // true minimum is -1/2
    const double pi = std::acos(-1.0);
    REQUIRE_THROWS_AS(intensity(broken, pi), contract_violation);
}

TEST_CASE("spec validation accepts the presets and rejects bad declarations") {
    validate_spec(zero_drift_spec(0.3, 2.0));
    validate_spec(sine_drift_spec(-1.0, 0.5));

    DiffusionSpec narrow = sine_drift_spec(0.0, 0.5);
    narrow.functional_range = 1.0;  // true spread needs 9/8
    REQUIRE_THROWS_AS(validate_spec(narrow), contract_violation);

    DiffusionSpec low_max = sine_drift_spec(0.0, 0.5);
    low_max.drift_integral_max = 1.5;  // 1 - cos reaches 2
    REQUIRE_THROWS_AS(validate_spec(low_max), contract_violation);

    DiffusionSpec flat = zero_drift_spec(0.0, 0.0);
    REQUIRE_THROWS_AS(validate_spec(flat), contract_violation);

    DiffusionSpec hollow;
    hollow.horizon = 1.0;
    REQUIRE_THROWS_AS(validate_spec(hollow), contract_violation);
}

TEST_CASE("endpoint proposal: zero drift is a single gaussian draw") {
    const DiffusionSpec spec = zero_drift_spec(0.25, 0.7);
    for (std::uint64_t seed = 900; seed < 950; ++seed) {
        UniformSource a(seed), b(seed);
        const EndpointDraw draw = sample_biased_endpoint(spec, a);
        REQUIRE(draw.proposals == 1);
        REQUIRE(a.draws() == 2);  // no acceptance uniform burned
        REQUIRE(draw.value == 0.25 + std::sqrt(0.7) * normal_draw(b));
    }
}

TEST_CASE("endpoint proposal: acceptance rate matches quadrature") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 0.5);
    const double sd = std::sqrt(spec.horizon);
    const double want = simpson(
        [&](double u) {
            const double z = (u - spec.start) / sd;
            return std::exp(-0.5 * z * z) / (sd * std::sqrt(kTwoPi)) *
                   std::exp(spec.drift_integral(u) - spec.drift_integral_max);
        },
        -8.0 * sd, 8.0 * sd, 4096);

    UniformSource root(901);
    const int reps = 20000;
    std::uint64_t proposals = 0;
    for (int i = 0; i < reps; ++i) {
        UniformSource src = root.split(i);
        proposals += sample_biased_endpoint(spec, src).proposals;
    }
    const double rate = reps / double(proposals);
    const double se = std::sqrt(want * (1.0 - want) / double(proposals));
    REQUIRE(std::abs(rate - want) < 4.0 * se);
}

TEST_CASE("endpoint proposal: distribution matches the quadrature CDF") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 0.5);
    const QuadratureCdf cdf = endpoint_cdf_oracle(spec, -5.0, 5.0, 2000);
    UniformSource root(902);
    const int n = 10000;
    std::vector<double> sample(n);
    for (int i = 0; i < n; ++i) {
        UniformSource src = root.split(i);
        sample[i] = sample_biased_endpoint(spec, src).value;
    }
    const double d = ks_statistic_against(sample, cdf);
    REQUIRE(d < ks_one_sample_critical(0.01, n));
    REQUIRE(d < 0.02);
}

TEST_CASE("endpoint proposal: misdeclared integral maximum is detected") {
    // claim a maximum below the true infimum so every proposal overshoots
    DiffusionSpec broken = sine_drift_spec(0.0, 0.5);
    broken.drift_integral_max = -1.0;
    UniformSource src(903);
    REQUIRE_THROWS_AS(sample_biased_endpoint(broken, src), contract_violation);
}

TEST_CASE("bridge skeleton: endpoints are free and bounds are checked") {
    UniformSource src(904);
    BridgeSkeleton skel(2.0, 1.0, -1.0);
    REQUIRE(skel.size() == 2);
    REQUIRE(skel.horizon() == 2.0);
    REQUIRE(skel.value_at(0.0, src) == 1.0);
    REQUIRE(skel.value_at(2.0, src) == -1.0);
    REQUIRE(src.draws() == 0);
    REQUIRE_THROWS_AS(skel.value_at(-0.1, src), std::out_of_range);
    REQUIRE_THROWS_AS(skel.value_at(2.1, src), std::out_of_range);
    REQUIRE_THROWS_AS(BridgeSkeleton(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("bridge skeleton: repeated queries return the stored value") {
    UniformSource src(905);
    BridgeSkeleton skel(1.0, 0.0, 0.0);
    const double v = skel.value_at(0.37, src);
    const std::uint64_t used = src.draws();
    REQUIRE(skel.value_at(0.37, src) == v);
    REQUIRE(src.draws() == used);
    REQUIRE(skel.size() == 3);
}

TEST_CASE("bridge skeleton: reveals condition on the nearest neighbors") {
    UniformSource src(906);
    BridgeSkeleton skel(1.0, 0.0, 0.0);
    const double w3 = skel.value_at(0.3, src);
    const double w7 = skel.value_at(0.7, src);
    UniformSource probe = src;  // clone the state to replay the next draw
    const double z = normal_draw(probe);
    const double v = skel.value_at(0.5, src);
    const double mean = w3 + 0.5 * (w7 - w3);
    const double var = 0.2 * 0.2 / 0.4;
    REQUIRE(v == Approx(mean + std::sqrt(var) * z).margin(1e-14));
}

TEST_CASE("bridge skeleton: midpoint moments of the standard bridge") {
    const int reps = 100000;
    UniformSource root(907);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < reps; ++i) {
        UniformSource src = root.split(i);
        BridgeSkeleton skel(1.0, 0.0, 0.0);
        const double v = skel.value_at(0.5, src);
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / reps;
    const double var = s2 / reps - mean * mean;
    // midpoint of a standard bridge is N(0, 1/4)
    REQUIRE(std::abs(mean) < 3.0 * std::sqrt(0.25 / reps));
    REQUIRE(std::abs(var - 0.25) < 3.0 * 0.25 * std::sqrt(2.0 / reps));
}

TEST_CASE("bridge skeleton: short-time reveals hug the start point") {
    UniformSource root(908);
    for (int i = 0; i < 50; ++i) {
        UniformSource src = root.split(i);
        BridgeSkeleton skel(1.0, 0.4, -2.0);
        REQUIRE(skel.value_at(1e-8, src) == Approx(0.4).margin(1e-3));
    }
}

TEST_CASE("intensity coin: zero intensity never succeeds") {
    const DiffusionSpec spec = zero_drift_spec(0.0, 1.0);
    UniformSource src(909);
    BridgeSkeleton skel(1.0, 0.0, 0.3);
    IntensityCoin coin(skel, spec, src);
    for (int i = 0; i < 200; ++i) REQUIRE(coin.toss() == 0);
    REQUIRE(coin.consumed() == 200);
    REQUIRE(skel.size() == 202);
}

TEST_CASE("intensity coin: constant intensity gives iid tosses at that rate") {
    const DiffusionSpec spec = constant_intensity_spec(0.3, 1.0);
    validate_spec(spec);

    UniformSource src(910);
    BridgeSkeleton skel(1.0, 0.0, 0.0);
    IntensityCoin coin(skel, spec, src);
    const int n = 20000;
    std::vector<int> bits(n);
    long heads = 0;
    for (int i = 0; i < n; ++i) {
        bits[i] = coin.toss();
        heads += bits[i];
    }
    REQUIRE(std::abs(heads / double(n) - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / n));
    // independence across tosses on a single skeleton
    REQUIRE(std::abs(runs_test_z(bits)) < 3.0);
}

TEST_CASE("intensity coin: first toss on a fresh skeleton costs four uniforms") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 0.5);
    UniformSource src(911);
    BridgeSkeleton skel(0.5, 0.0, 0.2);
    IntensityCoin coin(skel, spec, src);
    coin.toss();
    REQUIRE(src.draws() == 4);  // time, threshold, and one gaussian reveal
    REQUIRE(skel.size() == 3);
}

TEST_CASE("intensity coin: success rate matches a dense-path average") {
    const double T = 0.5, x = 0.0, y = 0.5;
    const DiffusionSpec spec = sine_drift_spec(x, T);

    UniformSource oracle_src(912);
    const int paths = 2000, grid = 256;
    double want = 0.0;
    for (int i = 0; i < paths; ++i) {
        const std::vector<double> w = dense_bridge(T, x, y, grid, oracle_src);
        double acc = 0.0;
        for (int j = 0; j < grid; ++j) acc += intensity(spec, w[j]);
        want += acc / grid;
    }
    want /= paths;

    UniformSource root(913);
    const int reps = 20000;
    long heads = 0;
    for (int i = 0; i < reps; ++i) {
        UniformSource src = root.split(i);
        BridgeSkeleton skel(T, x, y);
        IntensityCoin coin(skel, spec, src);
        heads += coin.toss();
    }
    REQUIRE(std::abs(heads / double(reps) - want) < 0.02);
}

TEST_CASE("exact sampler: zero drift reduces to a gaussian endpoint") {
    const DiffusionSpec spec = zero_drift_spec(0.5, 0.8);
    UniformSource root(914);
    const int n = 10000;
    std::vector<double> sample(n);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        UniformSource src = root.split(i);
        const ExactSampleResult res = exact_sample(spec, src);
        REQUIRE(res.proposals == 1);
        REQUIRE(res.intensity_coins == 1);
        REQUIRE(res.bridge_points == 1);
        REQUIRE(res.uniforms_consumed == 7);
        sample[i] = res.value;
        s1 += res.value;
        s2 += res.value * res.value;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean - 0.5) < 3.0 * std::sqrt(0.8 / n));
    REQUIRE(std::abs(var - 0.8) < 3.0 * 0.8 * std::sqrt(2.0 / n));
    const double d = ks_statistic_against(sample, [](double v) {
        return normal_cdf((v - 0.5) / std::sqrt(0.8));
    });
    REQUIRE(d < ks_one_sample_critical(0.01, n));
}

TEST_CASE("exact sampler refuses horizons with rate at or above one") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 1.0);  // rate 9/8
    UniformSource src(915);
    REQUIRE_THROWS_AS(exact_sample(spec, src), std::invalid_argument);
}

TEST_CASE("exact sampler: acceptance rate matches a dense-path oracle") {
    const double T = 0.5;
    const DiffusionSpec spec = sine_drift_spec(0.0, T);
    const double rate = spec.functional_range * T;

    // oracle: draw endpoints from their biased law, average exp(-rate * J)
    // with J estimated along dense pinned paths
    UniformSource oracle_src(916);
    const int paths = 2000, grid = 256;
    double want = 0.0;
    for (int i = 0; i < paths; ++i) {
        const double y = sample_biased_endpoint(spec, oracle_src).value;
        const std::vector<double> w = dense_bridge(T, 0.0, y, grid, oracle_src);
        double acc = 0.0;
        for (int j = 0; j < grid; ++j) acc += intensity(spec, w[j]);
        want += std::exp(-rate * acc / grid);
    }
    want /= paths;

    UniformSource root(917);
    const int reps = 10000;
    std::uint64_t proposals = 0;
    for (int i = 0; i < reps; ++i) {
        UniformSource src = root.split(i);
        proposals += exact_sample(spec, src).proposals;
    }
    const double emp = reps / double(proposals);
    REQUIRE(std::abs(emp - want) < 0.02);
}

TEST_CASE("exact sampler: endpoint law agrees with a discretized baseline") {
    const double T = 0.5;
    const DiffusionSpec spec = sine_drift_spec(0.0, T);
    const int n = 5000;
    UniformSource em_src(918);
    const std::vector<double> reference =
        euler_maruyama_reference(spec, 1e-3, n, em_src);
    UniformSource root(919);
    std::vector<double> sample(n);
    for (int i = 0; i < n; ++i) {
        UniformSource src = root.split(i);
        sample[i] = exact_sample(spec, src).value;
    }
    REQUIRE(ks_statistic(sample, reference) < ks_two_sample_critical(0.01, n, n));
}

TEST_CASE("segmenting: piece count and lengths") {
    const DiffusionSpec sine = sine_drift_spec(0.0, 1.0);
    const auto three = segment_horizon(sine, 2.0);
    REQUIRE(three.size() == 3);
    for (const auto& seg : three) {
        REQUIRE(seg.horizon == Approx(2.0 / 3.0).margin(1e-12));
        REQUIRE(seg.functional_range * seg.horizon <= 0.9 + 1e-12);
    }

    const DiffusionSpec zero = zero_drift_spec(0.0, 1.0);
    REQUIRE(segment_horizon(zero, 3.0).size() == 2);
    // a load already under the margin stays in one piece
    const auto one = segment_horizon(sine, 0.7);
    REQUIRE(one.size() == 1);
    REQUIRE(one.front().horizon == 0.7);

    REQUIRE_THROWS_AS(segment_horizon(sine, -1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(segment_horizon(sine, 1.0, 1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(segment_horizon(sine, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("segmenting invariants across random loads") {
    UniformSource rng(920);
    for (int trial = 0; trial < 200; ++trial) {
        DiffusionSpec spec = zero_drift_spec(0.0, 1.0);
        spec.functional_range = 0.05 + rng.next() * 2.0;
        const double total = 0.01 + rng.next() * 10.0;
        const auto segs = segment_horizon(spec, total);
        double covered = 0.0;
        for (const auto& s : segs) {
            covered += s.horizon;
            REQUIRE(s.functional_range * s.horizon <= 0.9 + 1e-9);
        }
        REQUIRE(covered == Approx(total).margin(1e-9));
    }
}

TEST_CASE("chained sampler: gaussian chaining stays gaussian") {
    const DiffusionSpec spec = zero_drift_spec(0.0, 1.0);
    UniformSource root(921);
    const int n = 10000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        UniformSource src = root.split(i);
        const ChainedSampleResult res = sample_chained(spec, 3.0, src);
        REQUIRE(res.segments == 2);
        s1 += res.value;
        s2 += res.value * res.value;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean) < 3.0 * std::sqrt(3.0 / n));
    REQUIRE(std::abs(var - 3.0) < 3.0 * 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("chained sampler: one segment reproduces the exact sampler") {
    const DiffusionSpec spec = zero_drift_spec(0.2, 1.0);
    for (std::uint64_t seed = 950; seed < 1000; ++seed) {
        UniformSource a(seed), b(seed);
        const ChainedSampleResult chained = sample_chained(spec, 1.0, a);
        const ExactSampleResult exact = exact_sample(spec, b);
        REQUIRE(chained.segments == 1);
        REQUIRE(chained.value == exact.value);
        REQUIRE(chained.uniforms_consumed == exact.uniforms_consumed);
    }
}

TEST_CASE("chained sampler: sine smoke run over a long horizon") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 1.0);
    UniformSource root(922);
    for (int i = 0; i < 100; ++i) {
        UniformSource src = root.split(i);
        const ChainedSampleResult res = sample_chained(spec, 2.0, src);
        REQUIRE(res.segments == 3);
        REQUIRE(std::isfinite(res.value));
        REQUIRE(res.proposals >= 3);
    }
}

TEST_CASE("exact sampler replays deterministically") {
    const DiffusionSpec spec = sine_drift_spec(0.0, 0.5);
    UniformSource root(923);
    for (int i = 0; i < 50; ++i) {
        UniformSource a = root.split(i), b = root.split(i);
        const ExactSampleResult ra = exact_sample(spec, a);
        const ExactSampleResult rb = exact_sample(spec, b);
        REQUIRE(ra.value == rb.value);
        REQUIRE(ra.proposals == rb.proposals);
        REQUIRE(ra.uniforms_consumed == rb.uniforms_consumed);
        UniformSource c = root.split(i + 5000);
        const ExactSampleResult rc = exact_sample(spec, c);
        if (i == 0) REQUIRE(ra.value != rc.value);
    }
}
