#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qbsde/errors.hpp"
#include "qbsde/forward_sde.hpp"

using namespace qbsde;

TEST_CASE("frozen dynamics hold the start state at machine precision") {
    const TimeGrid grid = make_grid(0.0, 1.0, 32);
    const PathBundle bundle = sample_brownian(grid, 500, 1, RngPolicy{5, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("frozen", {}, 1);
    const std::vector<double> x0 = {0.7};
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        for (std::size_t i = 0; i <= grid.n_steps; ++i) {
            CHECK(paths.value(p, i, 0) == 0.7);
        }
    }
}

TEST_CASE("unit diffusion from zero reproduces Brownian motion") {
    const TimeGrid grid = make_grid(0.0, 1.0, 64);
    const std::size_t n = 10000;
    const PathBundle bundle = sample_brownian(grid, n, 1, RngPolicy{11, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    const std::vector<double> x0 = {0.0};
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);

    double var = 0.0, mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += paths.value(p, grid.n_steps, 0);
    mean /= n;
    for (std::size_t p = 0; p < n; ++p) {
        const double d = paths.value(p, grid.n_steps, 0) - mean;
        var += d * d;
    }
    var /= n;
    CHECK(var > 0.9);
    CHECK(var < 1.1);

    // X equals the running Brownian sum exactly.
    for (std::size_t p = 0; p < 50; ++p) {
        CHECK(paths.value(p, 10, 0) == doctest::Approx(bundle.brownian(p, 10, 0)).epsilon(1e-14));
    }
}

TEST_CASE("OU mean at T matches the closed form") {
    const TimeGrid grid = make_grid(0.0, 1.0, 256);
    const std::size_t n = 20000;
    const PathBundle bundle = sample_brownian(grid, n, 1, RngPolicy{13, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("ou", {}, 1);
    const std::vector<double> x0 = {1.0};
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);

    double mean = 0.0;
    std::vector<double> xs(n);
    for (std::size_t p = 0; p < n; ++p) {
        xs[p] = paths.value(p, grid.n_steps, 0);
        mean += xs[p];
    }
    mean /= n;
    double sd = 0.0;
    for (double x : xs) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / n);
    const double se = sd / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - std::exp(-1.0)) < 3.0 * se + 0.01);
}

TEST_CASE("OU weak error in the mean scales like the step") {
    // The additive-noise OU-Euler recursion is linear, so the exact
    // martingale part can be subtracted as a control variate: what is left is
    // the scheme's deterministic mean, whose distance to e^{-1} must be O(h).
    const std::size_t n = 100000;
    std::vector<double> hs, errs;
    for (std::size_t steps : {16, 32, 64, 128}) {
        const TimeGrid grid = make_grid(0.0, 1.0, steps);
        const PathBundle bundle = sample_brownian(grid, n, 1, RngPolicy{17, 0});
        const SdeCoefficients coeffs = instantiate_coefficients("ou", {}, 1);
        const std::vector<double> x0 = {1.0};
        const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);

        const double h = grid.step();
        double mean_controlled = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double control = 0.0;
            double w = 1.0; // (1-h)^{N-1-i}
            for (std::size_t i = steps; i-- > 0;) {
                control += w * bundle.increment(p, i, 0);
                w *= (1.0 - h);
            }
            mean_controlled += paths.value(p, steps, 0) - control;
        }
        mean_controlled /= n;
        hs.push_back(h);
        errs.push_back(std::abs(mean_controlled - std::exp(-1.0)));
    }
    // log-log slope over the four grids
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        mx += std::log(hs[i]);
        my += std::log(errs[i]);
    }
    mx /= hs.size();
    my /= hs.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        sxx += (std::log(hs[i]) - mx) * (std::log(hs[i]) - mx);
        sxy += (std::log(hs[i]) - mx) * (std::log(errs[i]) - my);
    }
    const double slope = sxy / sxx;
    CHECK(slope > 0.7);
    CHECK(slope < 1.3);
}

TEST_CASE("first_exit basics") {
    const TimeGrid grid = make_grid(0.0, 1.0, 16);
    const PathBundle bundle = sample_brownian(grid, 300, 1, RngPolicy{23, 0});
    const SdeCoefficients frozen = instantiate_coefficients("frozen", {}, 1);
    const std::vector<double> x0 = {0.4};
    const StatePaths paths = simulate_euler(frozen, 0.0, x0, bundle);

    const ExitTimes exits = first_exit(paths, 1.0);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        CHECK(exits.exit_index[p] == grid.n_steps);
        CHECK(exits.capped[p] == 0);
    }
    CHECK(exits.capped_fraction() == 0.0);

    CHECK_THROWS_AS(first_exit(paths, 0.3), CapTooSmall);
}

TEST_CASE("exit index is the first strict exceedance and earlier nodes obey the cap") {
    const TimeGrid grid = make_grid(0.0, 1.0, 64);
    const std::size_t n = 4000;
    const PathBundle bundle = sample_brownian(grid, n, 1, RngPolicy{29, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    const std::vector<double> x0 = {0.0};
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);
    const double cap = 0.8;
    const ExitTimes exits = first_exit(paths, cap);

    std::size_t n_capped = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t e = exits.exit_index[p];
        CHECK(e >= 1);
        CHECK(e <= grid.n_steps);
        for (std::size_t i = 0; i < e; ++i) CHECK(paths.norm(p, i) <= cap);
        if (exits.capped[p]) {
            ++n_capped;
            CHECK(paths.norm(p, e) > cap);
        }
    }
    CHECK(n_capped > 0);
}

TEST_CASE("exit probability against a fine-grid oracle") {
    // Oracle first: the same exit functional on a 4096-step grid.  The
    // coarse 256-step probability must sit within 0.03 of it (discretization
    // bias plus MC noise both budgeted).
    const std::size_t n = 10000;
    const SdeCoefficients coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    const std::vector<double> x0 = {0.0};

    const TimeGrid fine = make_grid(0.0, 1.0, 4096);
    const PathBundle fine_bundle = sample_brownian(fine, n, 1, RngPolicy{31, 1});
    const StatePaths fine_paths = simulate_euler(coeffs, 0.0, x0, fine_bundle);
    const double p_fine = first_exit(fine_paths, 1.0).capped_fraction();

    const TimeGrid coarse = make_grid(0.0, 1.0, 256);
    const PathBundle coarse_bundle = sample_brownian(coarse, n, 1, RngPolicy{31, 2});
    const StatePaths coarse_paths = simulate_euler(coeffs, 0.0, x0, coarse_bundle);
    const double p_coarse = first_exit(coarse_paths, 1.0).capped_fraction();

    CHECK(std::abs(p_coarse - p_fine) < 0.03);
}

TEST_CASE("declared (H1)/(H2) constants pass their audit") {
    for (const auto& name : coefficient_catalog_names()) {
        SdeCoefficients c;
        if (name == "scaled_linear") c = instantiate_coefficients(name, {0.5, 0.3}, 1);
        else if (name == "constant_drift_unit_diffusion") c = instantiate_coefficients(name, {1.0}, 1);
        else c = instantiate_coefficients(name, {}, 1);
        const CoefficientAuditReport rep = audit_coefficients(c, 1, 1.0);
        INFO("coefficients ", name);
        CHECK(rep.pass);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const TimeGrid grid = make_grid(0.0, 1.0, 8);
    const PathBundle bundle = sample_brownian(grid, 10, 1, RngPolicy{1, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("ou", {}, 2);
    const std::vector<double> wrong = {1.0};
    CHECK_THROWS_AS(simulate_euler(coeffs, 0.0, std::span<const double>(wrong.data(), 1), bundle),
                    DimensionMismatch);
}
