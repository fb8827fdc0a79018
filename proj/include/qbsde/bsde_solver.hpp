#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbsde/forward_sde.hpp"
#include "qbsde/generators.hpp"
#include "qbsde/regression.hpp"
#include "qbsde/stochastic_core.hpp"

namespace qbsde {

// Read access to one path's trajectory for terminal functionals.
struct PathSlice {
    const StatePaths* paths = nullptr;
    const PathBundle* bundle = nullptr;
    std::size_t path = 0;
    std::size_t terminal_node = 0; // exit node when stopped, last node otherwise

    double x(std::size_t node, std::size_t comp = 0) const { return paths->value(path, node, comp); }
    double x_terminal(std::size_t comp = 0) const { return x(terminal_node, comp); }
    double brownian(std::size_t node, std::size_t comp = 0) const {
        return bundle->brownian(path, node, comp);
    }
    double brownian_terminal(std::size_t comp = 0) const { return brownian(terminal_node, comp); }
    std::size_t n_nodes() const { return paths->grid.n_steps + 1; }
    const TimeGrid& grid() const { return paths->grid; }
};

using TerminalRule = std::function<double(const PathSlice&)>;

// Terminal variable xi with its declared essential bound.  The bound is
// audited against every sampled path and feeds the a-priori band of the
// solver.  When xi carries information beyond the current state (a value
// frozen at an interior time, say), that information must be exposed through
// state_features: each feature is evaluated per (path, node) with the slice's
// terminal_node set to the node, and is appended to the regression state so
// the conditional expectations are taken against the right sigma-algebra.
struct TerminalFunctional {
    std::string name;
    TerminalRule rule;
    double bound = 0.0;
    bool uses_brownian = false;
    std::vector<TerminalRule> state_features;
};

TerminalFunctional terminal_constant(double c);
TerminalFunctional terminal_brownian_endpoint(double declared_bound = 8.0);
TerminalFunctional terminal_state_endpoint(double declared_bound, std::size_t comp = 0);
TerminalFunctional terminal_abs_brownian_capped(double cap);
TerminalFunctional terminal_cos_brownian();
TerminalFunctional terminal_smoothed_indicator(double sharpness = 4.0);
TerminalFunctional terminal_shifted(const TerminalFunctional& base, double shift);
TerminalFunctional terminal_scaled(const TerminalFunctional& base, double scale);
// base(xi) + eta(B at node of time t_eta); eta must be bounded.
TerminalFunctional terminal_plus_function_of_brownian(const TerminalFunctional& base,
                                                      double t_eta,
                                                      std::function<double(double)> eta,
                                                      double eta_bound,
                                                      const std::string& label);

struct RegressionConfig {
    int basis_degree = 2;
    // |Z| truncation level; unset resolves to 10 * (1 + ||xi||_inf) at solve time.
    std::optional<double> z_max;
    double picard_tol = 1e-10;
    int picard_max_iters = 50;
    bool clip_y = false;
    bool include_brownian_state = false; // append B_t columns to the regression state
};

struct SolverDiagnostics {
    std::vector<int> picard_iters;            // per node, max over paths
    std::vector<double> regression_residual;  // per node, rms of the Y-regression
    std::size_t truncation_hits = 0;
    std::size_t clip_hits = 0;
    std::size_t rank_deficient_nodes = 0;
    std::size_t terminal_bound_violations = 0;
    double band = 0.0;                    // a-priori band (||xi|| + |b| T) e^{alpha+ T}
    double band_violation_fraction = 0.0; // pre-clip fraction of (path,node) beyond band + 1e-6
    double z_max_used = 0.0;
    double se_y0 = 0.0; // MC standard error of the plain-mean final backward step
};

struct BsdeSolution {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t dim = 1;
    std::vector<double> y;                // [path][node]
    std::vector<double> z;                // [path][node][component]
    std::vector<std::size_t> term_node;   // per path: node at which the path is absorbed
    SolverDiagnostics diag;

    double y_at(std::size_t path, std::size_t node) const {
        return y[path * (grid.n_steps + 1) + node];
    }
    std::span<const double> z_at(std::size_t path, std::size_t node) const {
        return {z.data() + (path * (grid.n_steps + 1) + node) * dim, dim};
    }
    // Value at the (deterministic-state) start node; identical across paths.
    double y0() const { return y.empty() ? 0.0 : y[0]; }
    // Mean and standard error of Y at a node across paths.
    void node_mean_se(std::size_t node, double& mean, double& se) const;
};

// Backward regression scheme for the BSDE with driver `gen` and terminal
// `terminal`, driven by the forward paths and their Brownian increments.
// When `exit` is supplied each path is absorbed from its exit node onward
// (Y frozen at the terminal value, Z = 0).
BsdeSolution solve_bsde(const GeneratorSpec& gen, const TerminalFunctional& terminal,
                        const StatePaths& paths, const PathBundle& bundle,
                        const ExitTimes* exit_times, const RegressionConfig& cfg);

// Independent oracle for g = (gamma/2)|z|^2:
//   Y_t = (1/gamma) ln E[ exp(gamma xi) | F_t ].
struct OracleValues {
    std::vector<double> y; // [path][node]
    double y0 = 0.0;
    double se0 = 0.0; // delta-method standard error at the start node
    std::size_t n_nodes = 0;

    double y_at(std::size_t path, std::size_t node) const { return y[path * n_nodes + node]; }
};

OracleValues solve_colehopf(double gamma, const TerminalFunctional& terminal,
                            const StatePaths& paths, const PathBundle& bundle,
                            int basis_degree = 2);

// Independent oracle for g = a y + w z + c with d = 1:
//   Y_t = e^{a(T-t)} E^w[xi|F_t] + (c/a)(e^{a(T-t)} - 1)   (c (T-t) when a = 0),
// where E^w reweights by exp(w (B_T - B_t) - w^2 (T-t)/2).
OracleValues solve_linear_oracle(double a, double c, double w, const TerminalFunctional& terminal,
                                 const StatePaths& paths, const PathBundle& bundle,
                                 int basis_degree = 2);

} // namespace qbsde
