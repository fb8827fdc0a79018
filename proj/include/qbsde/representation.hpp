#pragma once

#include <optional>
#include <vector>

#include "qbsde/bsde_solver.hpp"
#include "qbsde/forward_sde.hpp"
#include "qbsde/generators.hpp"

namespace qbsde {

// One evaluation point of the representation limit: the stopped BSDE on
// [t, t+eps] started from x with terminal y + q . (X_{t+eps^tau} - x).
struct RepresentationQuery {
    double t = 0.0;
    double horizon = 1.0;
    double y = 0.0;
    std::vector<double> x;
    std::vector<double> q;
    double c0 = 0.0; // 0 resolves to |x| + 5
    std::size_t dim = 1;
    GeneratorSpec gen;
    SdeCoefficients coeffs;

    double x_norm() const;
    double resolved_c0() const;
    // g(t, y, sigma^*(t,x) q) + q . b(t,x)
    double target() const;
    void validate() const;
};

struct EpsilonLadder {
    std::vector<double> epsilons;      // strictly decreasing
    std::vector<std::size_t> substeps; // per-epsilon grid refinement
    // Measured values below these floors carry no slope information.
    double z_noise_floor = 1e-13;
    double sup_noise_floor = 5e-3;

    static EpsilonLadder standard(); // {0.2, 0.1, 0.05, 0.025}, 64 substeps each
    void validate(double t, double horizon) const;
};

// First-order bias allowance used by the ladder verdict.
inline double bias_budget(double eps, std::size_t substeps) {
    return 0.5 * eps + 2.0 * (eps / static_cast<double>(substeps));
}

struct QuotientEstimate {
    double eps = 0.0;
    std::size_t substeps = 0;
    double quotient_mean = 0.0;
    double quotient_se = 0.0;
    double z_energy = 0.0;    // estimate of E int |Z - sigma^* q|^2
    double sup_tilde_y = 0.0; // sup over paths/nodes of |Y - (y + q.(X-x))|
    double capped_fraction = 0.0;
    double target = 0.0;
    double l1_error = 0.0;
    double l2_error = 0.0;
};

QuotientEstimate quotient_estimate(const RepresentationQuery& query, double eps,
                                   std::size_t n_paths, std::size_t substeps,
                                   const RegressionConfig& cfg, const RngPolicy& rng);

struct RepresentationReport {
    double target = 0.0;
    std::vector<QuotientEstimate> rows; // ladder order, coarsest first
    double extrapolated_limit = 0.0;    // Richardson from the two smallest eps
    double raw_smallest = 0.0;          // unextrapolated smallest-eps quotient
    std::optional<double> z_slope;      // log-log slope of z_energy, when above floor
    std::optional<double> sup_slope;    // log-log slope of sup_tilde_y
    double c_fit = 0.0;                 // z_energy(eps_1)/eps_1^2
    bool c_fit_ok = false;              // z_energy(eps) <= 1.5 c_fit eps^2 on all rows
    double threshold = 0.0;             // 3 se(eps_K) + bias_budget(eps_K)
    double max_capped_fraction = 0.0;
    bool pass = false;
};

RepresentationReport limit_study(const RepresentationQuery& query, const EpsilonLadder& ladder,
                                 std::size_t n_paths, const RegressionConfig& cfg,
                                 std::uint64_t master_seed);

// Small-interval bound audits (zero-terminal and transformed forms).  The
// checker is pure so harness
// self-tests can feed it doctored diagnostics.
struct BoundAudit {
    bool eq3_ok = false;  // zero-terminal: sup |Y| <= slack |b| eps e^{alpha+ eps}
    bool eq10_ok = false; // transformed:  sup |Ytilde| <= slack btilde eps e^{alpha+ eps}
    double eq3_bound = 0.0;
    double eq3_sup = 0.0;
    double eq10_bound = 0.0;
    double eq10_sup = 0.0;
    double b_tilde = 0.0;
    double m_tilde = 0.0;
    double slack = 1.2;
};

BoundAudit bound_audit(const RepresentationQuery& query, double eps, double sup_tilde_y,
                       double zero_terminal_sup_y, double slack = 1.2);

// Max |Y| of the stopped BSDE with zero terminal on [t, t+eps].
double zero_terminal_sup(const RepresentationQuery& query, double eps, std::size_t n_paths,
                         std::size_t substeps, const RegressionConfig& cfg, const RngPolicy& rng);

BoundAudit run_bound_audit(const RepresentationQuery& query, double eps, std::size_t n_paths,
                           std::size_t substeps, const RegressionConfig& cfg, const RngPolicy& rng,
                           double slack = 1.2);

} // namespace qbsde
