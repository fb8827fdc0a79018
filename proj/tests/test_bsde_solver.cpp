#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qbsde/bsde_solver.hpp"
#include "qbsde/errors.hpp"
#include "support/oracles.hpp"

using namespace qbsde;

namespace {

struct World {
    PathBundle bundle;
    StatePaths paths;
};

World brownian_world(std::size_t n_paths, std::size_t n_steps, std::uint64_t seed,
                     double horizon = 1.0) {
    World w;
    const TimeGrid grid = make_grid(0.0, horizon, n_steps);
    w.bundle = sample_brownian(grid, n_paths, 1, RngPolicy{seed, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    const std::vector<double> x0 = {0.0};
    w.paths = simulate_euler(coeffs, 0.0, x0, w.bundle);
    return w;
}

} // namespace

TEST_CASE("regression reproduces representable targets") {
    const std::size_t n = 5000;
    std::vector<double> state(n), targets(n);
    const RngPolicy rng{77, 0};
    for (std::size_t i = 0; i < n; ++i) state[i] = rng.normal(i, 0);

    // Constants are in every basis.
    std::fill(targets.begin(), targets.end(), 3.25);
    RegressionResult fit = regress_condexp(targets, state, n, 1, 2);
    for (std::size_t i = 0; i < n; i += 500) CHECK(fit.fitted[i] == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(fit.residual_rms < 1e-10);

    // Exact representability of the identity at degree >= 1.
    RegressionResult ident = regress_condexp(state, state, n, 1, 1);
    for (std::size_t i = 0; i < n; i += 500) CHECK(ident.fitted[i] == doctest::Approx(state[i]).epsilon(1e-9));
    CHECK(ident.residual_rms <= 1e-10);
}

TEST_CASE("underresolved basis projects x^2 onto its Gaussian mean") {
    // Quadrature oracle: the L2(N(0,1)) projection of x^2 onto {1, x} is the
    // constant E[x^2] = 1 (the linear coefficient vanishes by symmetry).
    const double projected_constant = oracles::gauss_expect([](double x) { return x * x; });
    CHECK(projected_constant == doctest::Approx(1.0).epsilon(1e-8));

    const std::size_t n = 100000;
    std::vector<double> state(n), targets(n);
    const RngPolicy rng{78, 0};
    for (std::size_t i = 0; i < n; ++i) {
        state[i] = rng.normal(i, 0);
        targets[i] = state[i] * state[i];
    }
    RegressionResult fit = regress_condexp(targets, state, n, 1, 1);
    double mean_fitted = 0.0;
    for (double v : fit.fitted) mean_fitted += v;
    mean_fitted /= n;
    const double se = std::sqrt(2.0 / static_cast<double>(n)); // sd(x^2) = sqrt(2)
    CHECK(std::abs(mean_fitted - projected_constant) < 3.0 * se);
}

TEST_CASE("duplicated state columns trigger the ridge fallback") {
    const std::size_t n = 200;
    std::vector<double> state(n * 2), targets(n);
    const RngPolicy rng{79, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.normal(i, 0);
        state[2 * i] = v;
        state[2 * i + 1] = v;
        targets[i] = 2.0 * v;
    }
    RegressionResult fit = regress_condexp(targets, state, n, 2, 1);
    CHECK(fit.rank_deficient);
    CHECK(fit.fitted[0] == doctest::Approx(targets[0]).epsilon(1e-6));
}

TEST_CASE("degenerate state degrades to the sample mean") {
    const std::size_t n = 1000;
    std::vector<double> state(n, 4.2), targets(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        targets[i] = static_cast<double>(i % 7);
        mean += targets[i];
    }
    mean /= n;
    RegressionResult fit = regress_condexp(targets, state, n, 1, 2);
    CHECK_FALSE(fit.rank_deficient);
    CHECK(fit.fitted[123] == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("martingale terminal: Y_t = B_t, Z = 1") {
    const World w = brownian_world(50000, 64, 1001);
    const BsdeSolution sol = solve_bsde(instantiate_generator("zero", {}),
                                        terminal_brownian_endpoint(8.0), w.paths, w.bundle,
                                        nullptr, RegressionConfig{});

    CHECK(std::abs(sol.y0()) < 3.0 * sol.diag.se_y0 + 1e-9);

    double z_mean = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < sol.n_paths; p += 10) {
        for (std::size_t i = 0; i < 64; ++i) {
            z_mean += sol.z_at(p, i)[0];
            ++count;
        }
    }
    z_mean /= static_cast<double>(count);
    CHECK(std::abs(z_mean - 1.0) < 0.05);

    // Terminal exactness, bit-for-bit.
    for (std::size_t p = 0; p < sol.n_paths; p += 997) {
        CHECK(sol.y_at(p, 64) == w.bundle.brownian(p, 64, 0));
    }
}

TEST_CASE("linear driver reduces to the backward ODE") {
    // Oracle: y' = -g(t,y) = -(-y + 1), y(1) = 0, integrated by RK4.
    const double y0_oracle = oracles::rk4_backward(
        [](double, double y) { return -y + 1.0; }, 1.0, 0.0);
    CHECK(y0_oracle == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));

    const World w = brownian_world(20000, 64, 1002);
    const BsdeSolution sol = solve_bsde(instantiate_generator("linear", {-1.0, 1.0}),
                                        terminal_constant(0.0), w.paths, w.bundle, nullptr,
                                        RegressionConfig{});
    CHECK(std::abs(sol.y0() - y0_oracle) < 0.02);

    // a-priori band (||xi|| + |b| T) e^{alpha+ T} = 1; nothing may stray.
    CHECK(sol.diag.band == doctest::Approx(1.0));
    CHECK(sol.diag.band_violation_fraction < 0.01);
}

TEST_CASE("quadratic driver against the exponential-transform value") {
    // Gaussian MGF oracle by quadrature: ln E[e^{B_1}] = 1/2.
    const double mgf = oracles::gauss_expect([](double x) { return std::exp(x); });
    CHECK(std::log(mgf) == doctest::Approx(0.5).epsilon(1e-8));

    // Independent PDE oracle for the same BSDE.
    const double pde = oracles::PdeOracle::solve(
        [](double, double, double ux) { return 0.5 * ux * ux; },
        [](double x) { return x; }, 1.0, 0.0);
    CHECK(pde == doctest::Approx(0.5).epsilon(2e-3));

    const World w = brownian_world(50000, 64, 1003);
    const BsdeSolution sol = solve_bsde(instantiate_generator("pure_quadratic", {1.0}),
                                        terminal_brownian_endpoint(8.0), w.paths, w.bundle,
                                        nullptr, RegressionConfig{});
    CHECK(std::abs(sol.y0() - 0.5) < 0.05);
    CHECK(sol.diag.band_violation_fraction < 0.01);
    CHECK(sol.diag.truncation_hits == 0);

    const OracleValues ch = solve_colehopf(1.0, terminal_brownian_endpoint(8.0), w.paths, w.bundle);
    CHECK(std::abs(ch.y0 - 0.5) < 3.0 * ch.se0 + 1e-6);
    CHECK(std::abs(sol.y0() - ch.y0) < 0.05);
}

TEST_CASE("cole-hopf oracle on constants and cross-oracle agreement") {
    const World w = brownian_world(20000, 64, 1004);
    const OracleValues ch = solve_colehopf(1.0, terminal_constant(0.7), w.paths, w.bundle);
    for (std::size_t p = 0; p < 20000; p += 1999) {
        for (std::size_t i = 0; i <= 64; i += 8) {
            CHECK(ch.y_at(p, i) == doctest::Approx(0.7).epsilon(1e-9));
        }
    }

    // gamma = -2 with a capped terminal: fine-grid solver as the brute-force
    // reference for the exponential transform.  The kinked terminal needs a
    // degree-4 basis to resolve its conditional-expectation profile.
    const double exact = -0.5 * std::log(oracles::gauss_expect(
        [](double x) { return std::exp(-2.0 * std::min(std::abs(x), 3.0)); }));
    const World fine = brownian_world(20000, 512, 1005);
    RegressionConfig fine_cfg;
    fine_cfg.basis_degree = 4;
    const BsdeSolution ref = solve_bsde(instantiate_generator("pure_quadratic", {-2.0}),
                                        terminal_abs_brownian_capped(3.0), fine.paths, fine.bundle,
                                        nullptr, fine_cfg);
    const OracleValues ch2 =
        solve_colehopf(-2.0, terminal_abs_brownian_capped(3.0), fine.paths, fine.bundle);
    CHECK(std::abs(ch2.y0 - exact) < 3.0 * ch2.se0 + 1e-3);
    CHECK(std::abs(ref.y0() - ch2.y0) < 0.05);
    CHECK(std::abs(ref.y0() - exact) < 0.05);
}

TEST_CASE("linear change-of-measure oracle") {
    const World w = brownian_world(50000, 64, 1006);

    // Pure integral of a constant driver.
    const OracleValues flat = solve_linear_oracle(0.0, 1.0, 0.0, terminal_constant(0.0),
                                                  w.paths, w.bundle);
    CHECK(flat.y0 == doctest::Approx(1.0).epsilon(1e-12));

    // Backward ODE with a = -1, c = 1.
    const OracleValues ode = solve_linear_oracle(-1.0, 1.0, 0.0, terminal_constant(0.0),
                                                 w.paths, w.bundle);
    CHECK(ode.y0 == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));

    // Stein-identity case: E[B_1 e^{B_1 - 1/2}] = 1, first certified by quadrature.
    const double stein = oracles::gauss_expect(
        [](double x) { return x * std::exp(x - 0.5); });
    CHECK(stein == doctest::Approx(1.0).epsilon(1e-8));
    const OracleValues drifted = solve_linear_oracle(0.0, 0.0, 1.0, terminal_brownian_endpoint(8.0),
                                                     w.paths, w.bundle);
    CHECK(std::abs(drifted.y0 - stein) < 3.0 * drifted.se0);

    // affine_z solver run against the oracle on a nontrivial combination.
    const BsdeSolution sol = solve_bsde(instantiate_generator("affine_z", {-0.5, 0.3, 0.4}),
                                        terminal_brownian_endpoint(8.0), w.paths, w.bundle,
                                        nullptr, RegressionConfig{});
    const OracleValues oracle = solve_linear_oracle(-0.5, 0.3, 0.4, terminal_brownian_endpoint(8.0),
                                                    w.paths, w.bundle);
    CHECK(std::abs(sol.y0() - oracle.y0) < 0.05);
}

TEST_CASE("comparison monotonicity under a shared bundle") {
    const World w = brownian_world(30000, 64, 1007);
    const RegressionConfig cfg;
    const BsdeSolution lo = solve_bsde(instantiate_generator("zero", {}),
                                       terminal_abs_brownian_capped(2.0), w.paths, w.bundle,
                                       nullptr, cfg);
    const BsdeSolution hi = solve_bsde(instantiate_generator("pure_quadratic", {1.0}),
                                       terminal_abs_brownian_capped(2.0), w.paths, w.bundle,
                                       nullptr, cfg);
    CHECK(hi.y0() >= lo.y0() - 3.0 * (hi.diag.se_y0 + lo.diag.se_y0));
}

TEST_CASE("zero-terminal small-interval bound for the catalog") {
    // Solving (g, eps, 0) must stay inside 1.2 |b| eps e^{alpha+ eps}.
    const double eps = 0.1;
    World w;
    const TimeGrid grid = make_grid(0.0, eps, 32);
    w.bundle = sample_brownian(grid, 5000, 1, RngPolicy{1008, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    const std::vector<double> x0 = {0.0};
    w.paths = simulate_euler(coeffs, 0.0, x0, w.bundle);

    for (const auto& name : {"zero", "pure_quadratic", "siny_quadratic", "linear"}) {
        GeneratorSpec g;
        if (std::string(name) == "pure_quadratic") g = instantiate_generator(name, {1.0});
        else if (std::string(name) == "linear") g = instantiate_generator(name, {-1.0, 1.0});
        else g = instantiate_generator(name, {});

        const BsdeSolution sol =
            solve_bsde(g, terminal_constant(0.0), w.paths, w.bundle, nullptr, RegressionConfig{});
        double sup = 0.0;
        for (std::size_t p = 0; p < sol.n_paths; ++p) {
            for (std::size_t i = 0; i <= 32; ++i) sup = std::max(sup, std::abs(sol.y_at(p, i)));
        }
        const double bound =
            1.2 * std::abs(g.params.b) * eps * std::exp(std::max(g.params.alpha, 0.0) * eps);
        INFO("generator ", name);
        CHECK(sup <= bound + 1e-12);
    }
}

TEST_CASE("solver determinism is bit-exact") {
    const World w = brownian_world(2000, 32, 1009);
    const RegressionConfig cfg;
    const GeneratorSpec g = instantiate_generator("pure_quadratic", {1.0});
    const BsdeSolution a = solve_bsde(g, terminal_brownian_endpoint(8.0), w.paths, w.bundle, nullptr, cfg);
    const BsdeSolution b = solve_bsde(g, terminal_brownian_endpoint(8.0), w.paths, w.bundle, nullptr, cfg);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
}

TEST_CASE("z truncation is counted and respected") {
    const World w = brownian_world(5000, 32, 1010);
    RegressionConfig cfg;
    cfg.z_max = 0.01;
    const BsdeSolution sol = solve_bsde(instantiate_generator("zero", {}),
                                        terminal_brownian_endpoint(8.0), w.paths, w.bundle,
                                        nullptr, cfg);
    CHECK(sol.diag.truncation_hits > 0);
    for (std::size_t p = 0; p < sol.n_paths; p += 501) {
        for (std::size_t i = 0; i < 32; ++i) {
            CHECK(std::abs(sol.z_at(p, i)[0]) <= 0.01 + 1e-15);
        }
    }
}

TEST_CASE("undeclared y-growth in the driver trips the Picard divergence guard") {
    const World w = brownian_world(500, 16, 1011);
    GeneratorSpec rogue = instantiate_generator("zero", {});
    rogue.name = "rogue";
    rogue.g2 = [](double, double y, std::span<const double>) { return 100.0 * y + 1.0; };
    CHECK_THROWS_AS(solve_bsde(rogue, terminal_constant(1.0), w.paths, w.bundle, nullptr,
                               RegressionConfig{}),
                    PicardDiverged);
}

TEST_CASE("clipping keeps Y inside the band and is counted") {
    const World w = brownian_world(2000, 16, 1012);
    GeneratorSpec g = instantiate_generator("linear", {0.0, 1.0});
    TerminalFunctional underdeclared = terminal_brownian_endpoint(0.5); // band becomes 1.5
    RegressionConfig cfg;
    cfg.clip_y = true;
    const BsdeSolution sol = solve_bsde(g, underdeclared, w.paths, w.bundle, nullptr, cfg);
    CHECK(sol.diag.terminal_bound_violations > 0);
    for (std::size_t p = 0; p < sol.n_paths; ++p) {
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(std::abs(sol.y_at(p, i)) <= sol.diag.band + 1e-12);
        }
    }
}

TEST_CASE("absorbed paths freeze Y at the terminal value with Z = 0") {
    const World w = brownian_world(4000, 64, 1013);
    const ExitTimes exits = first_exit(w.paths, 0.8);
    const BsdeSolution sol = solve_bsde(instantiate_generator("pure_quadratic", {1.0}),
                                        terminal_abs_brownian_capped(2.0), w.paths, w.bundle,
                                        &exits, RegressionConfig{});
    bool saw_capped = false;
    for (std::size_t p = 0; p < sol.n_paths; ++p) {
        if (!exits.capped[p]) continue;
        saw_capped = true;
        const std::size_t e = exits.exit_index[p];
        const double xi = sol.y_at(p, e);
        for (std::size_t i = e; i <= 64; ++i) {
            CHECK(sol.y_at(p, i) == xi);
            CHECK(sol.z_at(p, i)[0] == 0.0);
        }
    }
    CHECK(saw_capped);
}

TEST_CASE("brownian state columns recover the martingale under a non-identity forward state") {
    // X is an OU process driven by the same B; conditioning on (X_t, B_t)
    // restores E[B_1|F_t] for the zero driver.
    const TimeGrid grid = make_grid(0.0, 1.0, 32);
    const PathBundle bundle = sample_brownian(grid, 20000, 1, RngPolicy{1014, 0});
    const SdeCoefficients coeffs = instantiate_coefficients("ou", {}, 1);
    const std::vector<double> x0 = {0.5};
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);

    RegressionConfig cfg;
    cfg.include_brownian_state = true;
    const BsdeSolution sol = solve_bsde(instantiate_generator("zero", {}),
                                        terminal_brownian_endpoint(8.0), paths, bundle, nullptr, cfg);
    CHECK(std::abs(sol.y0()) < 3.0 * sol.diag.se_y0 + 1e-9);
    for (std::size_t p = 0; p < sol.n_paths; p += 4999) {
        CHECK(sol.y_at(p, 32) == bundle.brownian(p, 32, 0));
    }
}
