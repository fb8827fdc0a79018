#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qbsde/stochastic_core.hpp"

namespace qbsde {

using DriftRule = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
// Row-major m x d matrix written into out.
using DiffusionRule = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

// Coefficients of the forward diffusion dX = b(t,X) dt + sigma(t,X) dB with
// their declared (H1)/(H2) constants.
struct SdeCoefficients {
    std::string name;
    std::size_t m = 1; // state dimension
    DriftRule drift;
    DiffusionRule diffusion;
    double mu = 0.0; // Lipschitz constant, declared
    double nu = 0.0; // linear growth constant, declared

    // sigma^*(t,x) q, the z-argument of the representation target (in R^d).
    std::vector<double> sigma_transpose_q(double t, std::span<const double> x,
                                          std::span<const double> q, std::size_t dim) const;
};

SdeCoefficients instantiate_coefficients(const std::string& name, const std::vector<double>& parameters,
                                         std::size_t m = 1);
std::vector<std::string> coefficient_catalog_names();

struct CoefficientAuditReport {
    double h1_violation = 0.0; // max over pairs of |b(x)-b(y)|+|sig(x)-sig(y)| - mu|x-y|
    double h2_violation = 0.0; // max over points of |b(x)|+|sig(x)| - nu(1+|x|)
    double tolerance = 1e-10;
    bool pass = false;
};

CoefficientAuditReport audit_coefficients(const SdeCoefficients& coeffs, std::size_t dim,
                                          double horizon, double x_span = 10.0,
                                          std::size_t n_points = 2000);

// Euler-Maruyama trajectories of X^{t,x} driven by a PathBundle.
struct StatePaths {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t m = 1;
    std::vector<double> start_state;
    std::vector<double> values; // [path][node][component]

    double value(std::size_t path, std::size_t node, std::size_t comp) const {
        return values[(path * (grid.n_steps + 1) + node) * m + comp];
    }
    std::span<const double> state(std::size_t path, std::size_t node) const {
        return {values.data() + (path * (grid.n_steps + 1) + node) * m, m};
    }
    double norm(std::size_t path, std::size_t node) const;
};

StatePaths simulate_euler(const SdeCoefficients& coeffs, double start_time,
                          std::span<const double> start_state, const PathBundle& bundle);

// Discretized first-exit times: first grid node whose state norm strictly
// exceeds the cap, clamped to the horizon.  Downstream consumers treat a path
// as absorbed from its exit node onward.
struct ExitTimes {
    double cap = 0.0;
    std::size_t horizon_index = 0;
    std::vector<std::size_t> exit_index; // per path, in [1, n_steps]
    std::vector<char> capped;            // per path

    double capped_fraction() const;
};

ExitTimes first_exit(const StatePaths& paths, double cap);

} // namespace qbsde
