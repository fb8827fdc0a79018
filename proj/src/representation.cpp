#include "qbsde/representation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "qbsde/errors.hpp"

namespace qbsde {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::optional<double> loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                                   double floor) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i] > floor) {
            lx.push_back(std::log(xs[i]));
            ly.push_back(std::log(ys[i]));
        }
    }
    if (lx.size() < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(ly.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

} // namespace

double RepresentationQuery::x_norm() const {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double RepresentationQuery::resolved_c0() const { return c0 > 0.0 ? c0 : x_norm() + 5.0; }

double RepresentationQuery::target() const {
    const std::vector<double> sz = coeffs.sigma_transpose_q(t, x, q, dim);
    std::vector<double> bvec(coeffs.m);
    coeffs.drift(t, x, bvec);
    return gen.g(t, y, std::span<const double>(sz.data(), sz.size())) + dot(q, bvec);
}

void RepresentationQuery::validate() const {
    if (x.size() != coeffs.m || q.size() != coeffs.m) {
        throw DimensionMismatch("representation query: x and q must have the state dimension");
    }
    if (!(t < horizon)) throw BadParameters("representation query: t must lie strictly below the horizon");
    if (!(resolved_c0() > x_norm())) throw CapTooSmall("representation query: C0 must exceed |x|");
}

EpsilonLadder EpsilonLadder::standard() {
    EpsilonLadder l;
    l.epsilons = {0.2, 0.1, 0.05, 0.025};
    l.substeps = {64, 64, 64, 64};
    return l;
}

void EpsilonLadder::validate(double t, double horizon) const {
    if (epsilons.size() < 3) throw BadParameters("epsilon ladder: need K >= 3 entries");
    if (substeps.size() != epsilons.size()) {
        throw BadParameters("epsilon ladder: one substep count per epsilon");
    }
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw BadParameters("epsilon ladder: entries must be positive");
        if (epsilons[i] > horizon - t + 1e-15) {
            throw BadParameters("epsilon ladder: entries must fit inside [t, horizon]");
        }
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
            throw BadParameters("epsilon ladder: entries must be strictly decreasing");
        }
        if (substeps[i] < 1) throw BadParameters("epsilon ladder: substeps must be >= 1");
    }
    if (!(epsilons.back() / epsilons.front() <= 0.25 + 1e-12)) {
        throw BadParameters("epsilon ladder: span too narrow to fit a slope (eps_K/eps_1 <= 1/4)");
    }
}

namespace {

// E int |Ztilde|^2 via the driver-integral identity: per path, the transformed
// driver integral sum_i h (g + q.b) minus Ytilde_0 telescopes to the discrete
// stochastic integral of Ztilde, so its variance across paths estimates the
// energy.  One joint solve yields a ~chi^2_3 realization (the regression
// coefficient noise is a low-dimensional common mode), so the estimate is
// averaged over disjoint path groups solved independently.
double z_energy_grouped(const RepresentationQuery& query, const TimeGrid& grid,
                        const PathBundle& bundle, const StatePaths& paths, const ExitTimes& exits,
                        const TerminalFunctional& term, const RegressionConfig& cfg) {
    const std::size_t n_paths = bundle.n_paths;
    const std::size_t m = query.coeffs.m;
    const double h = grid.step();
    const std::size_t min_group = 64;
    const std::size_t n_groups = std::min<std::size_t>(256, std::max<std::size_t>(1, n_paths / min_group));
    const std::size_t group_size = n_paths / n_groups;

    std::vector<double> bvec(m);
    double acc = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::size_t lo = g * group_size;
        const std::size_t hi = (g + 1 == n_groups) ? n_paths : lo + group_size;
        const std::size_t ng = hi - lo;

        PathBundle sub_bundle;
        sub_bundle.grid = grid;
        sub_bundle.n_paths = ng;
        sub_bundle.dim = bundle.dim;
        sub_bundle.increments.assign(
            bundle.increments.begin() + lo * grid.n_steps * bundle.dim,
            bundle.increments.begin() + hi * grid.n_steps * bundle.dim);

        StatePaths sub_paths;
        sub_paths.grid = grid;
        sub_paths.n_paths = ng;
        sub_paths.m = m;
        sub_paths.start_state = paths.start_state;
        sub_paths.values.assign(paths.values.begin() + lo * (grid.n_steps + 1) * m,
                                paths.values.begin() + hi * (grid.n_steps + 1) * m);

        ExitTimes sub_exits;
        sub_exits.cap = exits.cap;
        sub_exits.horizon_index = exits.horizon_index;
        sub_exits.exit_index.assign(exits.exit_index.begin() + lo, exits.exit_index.begin() + hi);
        sub_exits.capped.assign(exits.capped.begin() + lo, exits.capped.begin() + hi);

        const BsdeSolution sol = solve_bsde(query.gen, term, sub_paths, sub_bundle, &sub_exits, cfg);

        std::vector<double> driver_int(ng, 0.0);
        for (std::size_t p = 0; p < ng; ++p) {
            for (std::size_t i = 0; i < sol.term_node[p]; ++i) {
                const double t_i = grid.node(i);
                query.coeffs.drift(t_i, sub_paths.state(p, i), bvec);
                double qb = 0.0;
                for (std::size_t c = 0; c < m; ++c) qb += query.q[c] * bvec[c];
                driver_int[p] += h * (query.gen.g(t_i, sol.y_at(p, i), sol.z_at(p, i)) + qb);
            }
        }
        double mean_a = 0.0;
        for (double v : driver_int) mean_a += v;
        mean_a /= static_cast<double>(ng);
        double var_a = 0.0;
        for (double v : driver_int) var_a += (v - mean_a) * (v - mean_a);
        acc += var_a / static_cast<double>(ng);
    }
    return acc / static_cast<double>(n_groups);
}

} // namespace

QuotientEstimate quotient_estimate(const RepresentationQuery& query, double eps,
                                   std::size_t n_paths, std::size_t substeps,
                                   const RegressionConfig& cfg, const RngPolicy& rng) {
    query.validate();
    if (!(eps > 0.0) || eps > query.horizon - query.t + 1e-15) {
        throw BadParameters("quotient_estimate: eps must lie in (0, horizon - t]");
    }

    const TimeGrid grid = make_grid(query.t, query.t + eps, substeps);
    const PathBundle bundle = sample_brownian(grid, n_paths, query.dim, rng);
    const StatePaths paths = simulate_euler(query.coeffs, query.t, query.x, bundle);
    const ExitTimes exits = first_exit(paths, query.resolved_c0());

    // Terminal y + q.(X_term - x); the declared bound is the sampled maximum.
    const std::size_t m = query.coeffs.m;
    std::vector<double> q_copy = query.q, x_copy = query.x;
    const double y0 = query.y;
    TerminalFunctional term;
    term.name = "representation_increment";
    term.rule = [q_copy, x_copy, y0, m](const PathSlice& p) {
        double acc = y0;
        for (std::size_t c = 0; c < m; ++c) acc += q_copy[c] * (p.x_terminal(c) - x_copy[c]);
        return acc;
    };
    double max_abs = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const std::size_t tn = std::min(exits.exit_index[p], grid.n_steps);
        max_abs = std::max(max_abs, std::abs(term.rule(PathSlice{&paths, &bundle, p, tn})));
    }
    term.bound = max_abs;

    const BsdeSolution sol = solve_bsde(query.gen, term, paths, bundle, &exits, cfg);

    QuotientEstimate est;
    est.eps = eps;
    est.substeps = substeps;
    est.target = query.target();
    est.capped_fraction = exits.capped_fraction();

    // sup |Ytilde| plus the terminal's discrete martingale part
    // M_p = sum_i sigma^*(t_i, X_i) q . dB_i.  M has exact mean zero and is
    // subtracted from the quotient as a control variate, so the terminal's
    // sample-mean noise (common to all paths, hence invisible to the
    // cross-sectional SE) cancels instead of polluting the limit estimate.
    std::vector<double> sig(m * query.dim);
    std::vector<double> mart(n_paths, 0.0);
    double sup_ty = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const std::size_t tn = sol.term_node[p];
        for (std::size_t i = 0; i <= tn; ++i) {
            double shift = query.y;
            for (std::size_t c = 0; c < m; ++c) {
                shift += query.q[c] * (paths.value(p, i, c) - query.x[c]);
            }
            sup_ty = std::max(sup_ty, std::abs(sol.y_at(p, i) - shift));
            if (i < tn) {
                query.coeffs.diffusion(grid.node(i), paths.state(p, i), sig);
                for (std::size_t c = 0; c < query.dim; ++c) {
                    double szc = 0.0;
                    for (std::size_t r = 0; r < m; ++r) szc += sig[r * query.dim + c] * query.q[r];
                    mart[p] += szc * bundle.increment(p, i, c);
                }
            }
        }
    }
    est.sup_tilde_y = sup_ty;

    double mean_m = 0.0;
    for (double v : mart) mean_m += v;
    mean_m /= static_cast<double>(n_paths);
    est.quotient_mean = (sol.y0() - mean_m - query.y) / eps;

    // Plain-mean SE of the controlled final-step contributions.
    double mean_u = 0.0, ss_u = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) mean_u += sol.y_at(p, 1) - mart[p];
    mean_u /= static_cast<double>(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double d = sol.y_at(p, 1) - mart[p] - mean_u;
        ss_u += d * d;
    }
    est.quotient_se =
        std::sqrt(ss_u / static_cast<double>(n_paths - 1)) / std::sqrt(static_cast<double>(n_paths)) / eps;

    est.z_energy = z_energy_grouped(query, grid, bundle, paths, exits, term, cfg);

    est.l1_error = std::abs(est.quotient_mean - est.target);
    est.l2_error = std::sqrt(est.l1_error * est.l1_error + est.quotient_se * est.quotient_se);
    return est;
}

RepresentationReport limit_study(const RepresentationQuery& query, const EpsilonLadder& ladder,
                                 std::size_t n_paths, const RegressionConfig& cfg,
                                 std::uint64_t master_seed) {
    query.validate();
    ladder.validate(query.t, query.horizon);

    RepresentationReport rep;
    rep.target = query.target();
    const std::size_t k = ladder.epsilons.size();
    rep.rows.reserve(k);
    // Common random numbers across the ladder: one master seed, epsilon-indexed
    // substreams.  The start time is folded in so distinct t-queries do not
    // silently reuse the same increments.
    std::uint64_t t_bits;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&t_bits, &query.t, sizeof(t_bits));
    const std::uint64_t seed_t = mix_words(master_seed, t_bits);
    for (std::size_t j = 0; j < k; ++j) {
        const RngPolicy rng{seed_t, j};
        try {
            rep.rows.push_back(quotient_estimate(query, ladder.epsilons[j], n_paths,
                                                 ladder.substeps[j], cfg, rng));
        } catch (const std::exception& e) {
            throw LadderTooCoarse("limit_study: ladder entry eps=" +
                                  std::to_string(ladder.epsilons[j]) + " failed: " + e.what());
        }
        rep.max_capped_fraction = std::max(rep.max_capped_fraction, rep.rows.back().capped_fraction);
    }

    const QuotientEstimate& fine = rep.rows[k - 1];
    const QuotientEstimate& next = rep.rows[k - 2];
    rep.raw_smallest = fine.quotient_mean;
    // Richardson assuming first-order bias in eps.
    rep.extrapolated_limit =
        fine.quotient_mean +
        (fine.quotient_mean - next.quotient_mean) * fine.eps / (next.eps - fine.eps);

    std::vector<double> eps_v, z_v, sup_v;
    for (const auto& r : rep.rows) {
        eps_v.push_back(r.eps);
        z_v.push_back(r.z_energy);
        sup_v.push_back(r.sup_tilde_y);
    }
    rep.z_slope = loglog_slope(eps_v, z_v, ladder.z_noise_floor);
    rep.sup_slope = loglog_slope(eps_v, sup_v, ladder.sup_noise_floor);

    rep.c_fit = rep.rows.front().z_energy / (rep.rows.front().eps * rep.rows.front().eps);
    rep.c_fit_ok = true;
    for (const auto& r : rep.rows) {
        if (r.z_energy > ladder.z_noise_floor &&
            r.z_energy > 1.5 * rep.c_fit * r.eps * r.eps) {
            rep.c_fit_ok = false;
        }
    }

    rep.threshold = 3.0 * fine.quotient_se + bias_budget(fine.eps, fine.substeps);
    rep.pass = std::abs(rep.extrapolated_limit - rep.target) <= rep.threshold;
    return rep;
}

BoundAudit bound_audit(const RepresentationQuery& query, double eps, double sup_tilde_y,
                       double zero_terminal_sup_y, double slack) {
    BoundAudit audit;
    audit.slack = slack;

    const double alpha_plus = std::max(query.gen.params.alpha, 0.0);
    const double abs_b = std::abs(query.gen.params.b);
    const double growth = std::exp(alpha_plus * eps);

    audit.eq3_bound = slack * abs_b * eps * growth;
    audit.eq3_sup = zero_terminal_sup_y;
    audit.eq3_ok = zero_terminal_sup_y <= audit.eq3_bound + 1e-12;

    // Constants from the transformed-generator estimate in the proof of the
    // representation theorem: Mtilde bounds |Ytilde| through the chain
    // ||Ytilde|| <= ||Y|| + ||y + q.(X - x)||, and btilde collects the shifted
    // quadratic terms.
    double qn = 0.0;
    for (double v : query.q) qn += v * v;
    qn = std::sqrt(qn);
    const double c0 = query.resolved_c0();
    const double shift_bound = std::abs(query.y) + qn * (c0 + query.x_norm());
    const double band_sub = (shift_bound + abs_b * eps) * growth;
    audit.m_tilde = band_sub + shift_bound;

    const double nu = query.coeffs.nu;
    audit.b_tilde = abs_b +
                    2.0 * qn * qn * nu * nu * (1.0 + c0) * (1.0 + c0) *
                        query.gen.params.l(2.0 * audit.m_tilde + 1.0) +
                    qn * nu * (1.0 + c0);
    audit.eq10_bound = slack * audit.b_tilde * eps * growth;
    audit.eq10_sup = sup_tilde_y;
    audit.eq10_ok = sup_tilde_y <= audit.eq10_bound + 1e-12;
    return audit;
}

double zero_terminal_sup(const RepresentationQuery& query, double eps, std::size_t n_paths,
                         std::size_t substeps, const RegressionConfig& cfg, const RngPolicy& rng) {
    query.validate();
    const TimeGrid grid = make_grid(query.t, query.t + eps, substeps);
    const PathBundle bundle = sample_brownian(grid, n_paths, query.dim, rng);
    const StatePaths paths = simulate_euler(query.coeffs, query.t, query.x, bundle);
    const ExitTimes exits = first_exit(paths, query.resolved_c0());

    const BsdeSolution sol = solve_bsde(query.gen, terminal_constant(0.0), paths, bundle, &exits, cfg);
    double sup = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t i = 0; i <= sol.term_node[p]; ++i) {
            sup = std::max(sup, std::abs(sol.y_at(p, i)));
        }
    }
    return sup;
}

BoundAudit run_bound_audit(const RepresentationQuery& query, double eps, std::size_t n_paths,
                           std::size_t substeps, const RegressionConfig& cfg, const RngPolicy& rng,
                           double slack) {
    const QuotientEstimate est = quotient_estimate(query, eps, n_paths, substeps, cfg, rng);
    const double zsup = zero_terminal_sup(query, eps, n_paths, substeps, cfg, rng);
    return bound_audit(query, eps, est.sup_tilde_y, zsup, slack);
}

} // namespace qbsde
