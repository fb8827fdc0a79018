#include "qbsde/gexpectation.hpp"

#include <algorithm>
#include <cmath>

#include "qbsde/errors.hpp"

namespace qbsde {

namespace {

struct Workspace {
    PathBundle bundle;
    StatePaths paths;
};

Workspace make_workspace(const GexpEnvironment& env) {
    Workspace ws;
    const TimeGrid grid = make_grid(0.0, env.horizon, env.n_steps);
    ws.bundle = sample_brownian(grid, env.n_paths, env.dim, RngPolicy{env.master_seed, 0});
    std::vector<double> x0(env.coeffs.m, 0.0);
    ws.paths = simulate_euler(env.coeffs, 0.0, x0, ws.bundle);
    return ws;
}

void require_a5(const GeneratorSpec& gen, const char* where) {
    if (!gen.params.a5) {
        throw BadParameters(std::string(where) + ": generator '" + gen.name +
                            "' is not A5-flagged; quadratic g-expectation probes require g(t,y,0)=0");
    }
}

void require_audit(const GeneratorSpec& gen, double horizon, std::size_t dim, const char* where) {
    const auto grid = standard_audit_grid(horizon, dim, 20000);
    const AuditReport rep = check_assumptions(gen, grid);
    if (!rep.pass) {
        throw BadParameters(std::string(where) + ": generator '" + gen.name +
                            "' fails its declared growth audit");
    }
}

std::size_t node_of_time(const TimeGrid& grid, double t) {
    const auto node = static_cast<std::size_t>(std::llround((t - grid.start) / grid.step()));
    if (node > grid.n_steps || std::abs(grid.node(node) - t) > 1e-9) {
        throw BadParameters("eval time " + std::to_string(t) + " does not align with the grid");
    }
    return node;
}

void mean_se_of(const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) /
                            std::sqrt(static_cast<double>(v.size()))
                      : 0.0;
}

RepresentationQuery corollary36_query(const GeneratorSpec& gen, double t, double y, double z,
                                      double horizon) {
    RepresentationQuery q;
    q.t = t;
    q.horizon = horizon;
    q.y = y;
    q.x = {0.0};
    q.q = {z};
    q.c0 = 5.0;
    q.dim = 1;
    q.gen = gen;
    q.coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    return q;
}

} // namespace

GexpEnvironment GexpEnvironment::standard(std::uint64_t seed, std::size_t n_paths) {
    GexpEnvironment env;
    env.master_seed = seed;
    env.n_paths = n_paths;
    env.coeffs = instantiate_coefficients("zero_drift_unit_diffusion", {}, 1);
    return env;
}

ConditionalGexp conditional_gexp(const GExpectationQuery& query, const StatePaths& paths,
                                 const PathBundle& bundle, const RegressionConfig& cfg) {
    require_a5(query.gen, "conditional_gexp");
    require_audit(query.gen, query.horizon, bundle.dim, "conditional_gexp");

    const BsdeSolution sol = solve_bsde(query.gen, query.terminal, paths, bundle, nullptr, cfg);

    ConditionalGexp out;
    out.eval_times = query.eval_times;
    out.value0 = sol.y0();
    out.se0 = sol.diag.se_y0;
    for (double t : query.eval_times) {
        const std::size_t node = node_of_time(paths.grid, t);
        out.eval_nodes.push_back(node);
        std::vector<double> vals(paths.n_paths);
        for (std::size_t p = 0; p < paths.n_paths; ++p) vals[p] = sol.y_at(p, node);
        out.values.push_back(std::move(vals));
    }
    return out;
}

std::vector<TerminalFunctional> default_terminal_battery() {
    return {terminal_brownian_endpoint(8.0), terminal_abs_brownian_capped(2.0),
            terminal_cos_brownian(), terminal_smoothed_indicator(4.0)};
}

std::vector<TerminalFunctional> uniqueness_terminal_battery() {
    std::vector<TerminalFunctional> battery = {terminal_constant(1.0), terminal_constant(-0.5)};
    for (auto& t : default_terminal_battery()) battery.push_back(t);
    battery.push_back(terminal_scaled(terminal_cos_brownian(), 2.0));
    battery.push_back(terminal_scaled(terminal_abs_brownian_capped(2.0), 0.5));
    return battery;
}

PropertyReport converse_comparison_probe(const GeneratorSpec& g1, const GeneratorSpec& g2,
                                         const std::vector<TerminalFunctional>& battery,
                                         const std::vector<double>& eval_times,
                                         const GexpEnvironment& env) {
    if (battery.empty()) throw BadParameters("converse_comparison_probe: battery must be nonempty");
    require_audit(g1, env.horizon, env.dim, "converse_comparison_probe");
    require_audit(g2, env.horizon, env.dim, "converse_comparison_probe");

    PropertyReport rep;
    rep.theorem_id = "4.1/5.2";
    const auto grid_pts = standard_audit_grid(env.horizon, env.dim, 20000);
    const ComparisonVerdict cmp = compare_on_grid(g1, g2, grid_pts);

    // Direction A (contrapositive of the converse comparison): at a strict
    // generator-order witness the representation quotients must order the
    // same way.
    if (cmp.strict) {
        const bool g1_above = cmp.max_above > 0.0;
        const AuditPoint& w = g1_above ? cmp.witness_above : cmp.witness_below;
        const double t_star = std::min(w.t, 0.5 * env.horizon);
        const double eps = 0.05;
        const RegressionConfig cfg = env.cfg;
        const RngPolicy rng{env.master_seed, 7};
        const auto qa = quotient_estimate(corollary36_query(g1, t_star, w.y, w.z[0], env.horizon),
                                          eps, env.n_paths, 64, cfg, rng);
        const auto qb = quotient_estimate(corollary36_query(g2, t_star, w.y, w.z[0], env.horizon),
                                          eps, env.n_paths, 64, cfg, rng);
        CaseRecord c;
        c.case_id = "4.1/quotient_order_at_witness";
        const double hi = g1_above ? qa.quotient_mean : qb.quotient_mean;
        const double lo = g1_above ? qb.quotient_mean : qa.quotient_mean;
        c.statistic = hi - lo;
        c.se = qa.quotient_se + qb.quotient_se;
        c.threshold = -3.0 * c.se; // require hi > lo - 3 (SE1 + SE2)
        c.pass = c.statistic > c.threshold;
        c.witness = "(t=" + std::to_string(t_star) + ", y=" + std::to_string(w.y) +
                    ", z=" + std::to_string(w.z.empty() ? 0.0 : w.z[0]) + ")";
        rep.cases.push_back(c);
    }

    const bool ordered_leq = (cmp.ordering == Ordering::LessOrEqual || cmp.ordering == Ordering::Equal);
    if (!ordered_leq) {
        CaseRecord c;
        c.case_id = "5.2/forward_hypothesis_rejected";
        c.statistic = cmp.max_above;
        c.threshold = 0.0;
        c.pass = true; // the probe correctly refuses to assert the ordering
        c.witness = "(t=" + std::to_string(cmp.witness_above.t) +
                    ", y=" + std::to_string(cmp.witness_above.y) + ", z=" +
                    std::to_string(cmp.witness_above.z.empty() ? 0.0 : cmp.witness_above.z[0]) + ")";
        c.note = "g1 > g2 at the witness; ordering hypothesis rejected before any BSDE solve";
        rep.cases.push_back(c);
        rep.notes = "forward direction skipped: g1 <= g2 fails on the audit grid";
        return rep;
    }

    // Direction B (Theorem 5.2 (iii) => (i)/(ii)): solve both with one bundle.
    const Workspace ws = make_workspace(env);
    for (const auto& xi : battery) {
        const BsdeSolution s1 = solve_bsde(g1, xi, ws.paths, ws.bundle, nullptr, env.cfg);
        const BsdeSolution s2 = solve_bsde(g2, xi, ws.paths, ws.bundle, nullptr, env.cfg);
        for (double t : eval_times) {
            const std::size_t node = node_of_time(ws.paths.grid, t);

            std::vector<double> diffs(env.n_paths);
            for (std::size_t p = 0; p < env.n_paths; ++p) {
                diffs[p] = s1.y_at(p, node) - s2.y_at(p, node);
            }
            double dmean, dse;
            mean_se_of(diffs, dmean, dse);

            double pos_mass = 0.0;
            for (double d : diffs) pos_mass += std::max(d, 0.0);
            pos_mass /= static_cast<double>(env.n_paths);

            CaseRecord ci;
            ci.case_id = "5.2(i)/" + xi.name + "/t=" + std::to_string(t);
            ci.statistic = pos_mass;
            ci.se = dse;
            ci.threshold = 3.0 * dse;
            ci.pass = pos_mass <= ci.threshold;
            rep.cases.push_back(ci);

            CaseRecord ce;
            ce.case_id = "5.2(ii)/" + xi.name + "/t=" + std::to_string(t);
            ce.statistic = dmean;
            ce.se = dse;
            ce.threshold = 3.0 * dse;
            ce.pass = dmean <= ce.threshold;
            rep.cases.push_back(ce);
        }
    }
    return rep;
}

PropertyReport self_financing_check(const GeneratorSpec& gen, const GexpEnvironment& env) {
    require_audit(gen, env.horizon, env.dim, "self_financing_check");

    PropertyReport rep;
    rep.theorem_id = "4.2";

    const std::vector<double> zero_z(env.dim, 0.0);
    double max_g = 0.0;
    const TimeGrid grid = make_grid(0.0, env.horizon, env.n_steps);
    for (std::size_t i = 0; i <= grid.n_steps; ++i) {
        max_g = std::max(max_g, std::abs(gen.g(grid.node(i), 0.0, zero_z)));
    }
    const bool side_i = max_g <= 1e-12;

    const Workspace ws = make_workspace(env);
    const BsdeSolution sol = solve_bsde(gen, terminal_constant(0.0), ws.paths, ws.bundle, nullptr, env.cfg);
    double worst = 0.0, worst_thr = 0.0;
    bool side_ii = true;
    for (std::size_t i = 0; i <= grid.n_steps; ++i) {
        double mean, se;
        sol.node_mean_se(i, mean, se);
        const double thr = 3.0 * se + 0.01;
        if (std::abs(mean) > worst) {
            worst = std::abs(mean);
            worst_thr = thr;
        }
        if (std::abs(mean) > thr) side_ii = false;
    }

    CaseRecord ci{"4.2(i)/max|g(t,0,0)|", max_g, 0.0, 1e-12, side_i, "", ""};
    CaseRecord cii{"4.2(ii)/max|mean Y|", worst, 0.0, worst_thr, side_ii, "", ""};
    CaseRecord eq{"4.2/equivalence", side_i == side_ii ? 0.0 : 1.0, 0.0, 0.0,
                  side_i == side_ii, "",
                  side_i ? "both sides hold" : "both sides fail consistently"};
    // The per-side records document the observations; the equivalence record
    // carries the theorem verdict.
    ci.pass = true;
    cii.pass = true;
    ci.note = side_i ? "holds" : "fails";
    cii.note = side_ii ? "holds" : "fails";
    rep.cases = {ci, cii, eq};
    return rep;
}

PropertyReport zero_interest_check(const GeneratorSpec& gen, const std::vector<double>& y_values,
                                   const GexpEnvironment& env) {
    require_audit(gen, env.horizon, env.dim, "zero_interest_check");

    PropertyReport rep;
    rep.theorem_id = "4.3";
    const std::vector<double> zero_z(env.dim, 0.0);
    const TimeGrid grid = make_grid(0.0, env.horizon, env.n_steps);
    const Workspace ws = make_workspace(env);

    for (double y : y_values) {
        double max_g = 0.0;
        for (std::size_t i = 0; i <= grid.n_steps; ++i) {
            max_g = std::max(max_g, std::abs(gen.g(grid.node(i), y, zero_z)));
        }
        const bool side_i = max_g <= 1e-12;

        const BsdeSolution sol =
            solve_bsde(gen, terminal_constant(y), ws.paths, ws.bundle, nullptr, env.cfg);
        double worst = 0.0, worst_thr = 0.0;
        bool side_ii = true;
        for (std::size_t i = 0; i <= grid.n_steps; ++i) {
            double mean, se;
            sol.node_mean_se(i, mean, se);
            const double thr = 3.0 * se + 0.01;
            if (std::abs(mean - y) > worst) {
                worst = std::abs(mean - y);
                worst_thr = thr;
            }
            if (std::abs(mean - y) > thr) side_ii = false;
        }

        CaseRecord c;
        c.case_id = "4.3/y=" + std::to_string(y);
        c.statistic = worst;
        c.threshold = worst_thr;
        c.pass = (side_i == side_ii);
        c.note = std::string(side_i ? "g(.,y,0)=0" : "g(.,y,0)!=0") +
                 (side_ii ? ", Y=y holds" : ", Y=y fails");
        rep.cases.push_back(c);
    }
    return rep;
}

PropertyReport uniqueness_probe(const GeneratorSpec& g1, const GeneratorSpec& g2,
                                const std::vector<TerminalFunctional>& battery,
                                const GexpEnvironment& env) {
    require_a5(g1, "uniqueness_probe");
    require_a5(g2, "uniqueness_probe");
    require_audit(g1, env.horizon, env.dim, "uniqueness_probe");
    require_audit(g2, env.horizon, env.dim, "uniqueness_probe");

    PropertyReport rep;
    rep.theorem_id = "5.1";
    const auto grid_pts = standard_audit_grid(env.horizon, env.dim, 20000);
    const ComparisonVerdict cmp = compare_on_grid(g1, g2, grid_pts);
    const Workspace ws = make_workspace(env);

    bool any_detected = false;
    double best_gap = 0.0;
    std::string best_witness;
    for (const auto& xi : battery) {
        const BsdeSolution s1 = solve_bsde(g1, xi, ws.paths, ws.bundle, nullptr, env.cfg);
        const BsdeSolution s2 = solve_bsde(g2, xi, ws.paths, ws.bundle, nullptr, env.cfg);
        const double gap = s1.y0() - s2.y0();
        const double se = s1.diag.se_y0 + s2.diag.se_y0;

        if (cmp.ordering == Ordering::Equal) {
            CaseRecord c;
            c.case_id = "5.1(ii=>i)/" + xi.name;
            c.statistic = std::abs(gap);
            c.se = se;
            c.threshold = 3.0 * se;
            c.pass = std::abs(gap) <= c.threshold;
            rep.cases.push_back(c);
        } else if (std::abs(gap) > 3.0 * se + 0.01) {
            any_detected = true;
            if (std::abs(gap) > std::abs(best_gap)) {
                best_gap = gap;
                best_witness = xi.name;
            }
            CaseRecord c;
            c.case_id = "5.1/distinguished/" + xi.name;
            c.statistic = gap;
            c.se = se;
            c.threshold = 3.0 * se + 0.01;
            c.pass = true;
            c.witness = xi.name;
            rep.cases.push_back(c);
        }
    }

    if (cmp.ordering != Ordering::Equal && !any_detected) {
        CaseRecord c;
        c.case_id = "5.1/battery_failed_to_distinguish";
        c.statistic = std::max(cmp.max_above, cmp.max_below);
        c.threshold = 0.0;
        c.pass = false;
        c.note = "generators differ on the audit grid but no battery terminal separated them";
        rep.cases.push_back(c);
    }

    // (i) => (ii) is evidenced, not proven: when the battery cannot separate
    // the generators, scan representation targets on a small (t,y,z) grid.
    if (cmp.ordering == Ordering::Equal) {
        double max_disc = 0.0, max_tol = 0.0;
        EpsilonLadder lad;
        lad.epsilons = {0.08, 0.04, 0.02};
        lad.substeps = {32, 32, 32};
        const std::size_t n_small = std::max<std::size_t>(2000, env.n_paths / 10);
        for (double t : {0.0, 0.2, 0.4}) {
            for (double y : {-1.0, 0.0, 1.0}) {
                for (double z : {-1.0, 0.5, 2.0}) {
                    const auto r1 = limit_study(corollary36_query(g1, t, y, z, env.horizon), lad,
                                                n_small, env.cfg, env.master_seed ^ 0xabcdULL);
                    const auto r2 = limit_study(corollary36_query(g2, t, y, z, env.horizon), lad,
                                                n_small, env.cfg, env.master_seed ^ 0xabcdULL);
                    max_disc = std::max(max_disc,
                                        std::abs(r1.extrapolated_limit - r2.extrapolated_limit));
                    max_tol = std::max(max_tol, r1.threshold + r2.threshold);
                }
            }
        }
        CaseRecord c;
        c.case_id = "5.1(i=>ii)/representation_scan";
        c.statistic = max_disc;
        c.threshold = max_tol;
        c.pass = max_disc <= max_tol;
        c.note = "evidence only: finite battery and 27-point scan cannot prove the quantifier";
        rep.cases.push_back(c);
    }

    if (any_detected) {
        rep.notes = "distinguished on " + best_witness + " with gap " + std::to_string(best_gap);
    }
    return rep;
}

PropertyReport translation_invariance_check(const GeneratorSpec& gen,
                                            const TerminalFunctional& terminal,
                                            const std::vector<double>& shifts,
                                            const GexpEnvironment& env) {
    require_a5(gen, "translation_invariance_check");
    require_audit(gen, env.horizon, env.dim, "translation_invariance_check");

    PropertyReport rep;
    rep.theorem_id = "5.3";
    const Workspace ws = make_workspace(env);
    const BsdeSolution base = solve_bsde(gen, terminal, ws.paths, ws.bundle, nullptr, env.cfg);

    bool any_violation = false;
    double max_disc = 0.0;
    std::string max_witness;
    for (double c_shift : shifts) {
        const BsdeSolution shifted =
            solve_bsde(gen, terminal_shifted(terminal, c_shift), ws.paths, ws.bundle, nullptr, env.cfg);
        const double disc = std::abs(shifted.y0() - base.y0() - c_shift);
        const double se = shifted.diag.se_y0 + base.diag.se_y0;
        const double threshold = 3.0 * se + 0.02;

        CaseRecord c;
        c.case_id = "5.3(ii)/C=" + std::to_string(c_shift);
        c.statistic = disc;
        c.se = se;
        c.threshold = threshold;
        if (gen.y_independent) {
            c.pass = disc <= threshold;
        } else {
            // y-dependent generators must break additivity somewhere; record
            // the observation, the aggregated detection case follows.
            c.pass = true;
            c.note = disc > threshold ? "violation" : "no violation at this shift";
        }
        if (disc > threshold) {
            any_violation = true;
            if (disc > max_disc) {
                max_disc = disc;
                max_witness = "C=" + std::to_string(c_shift);
            }
        }
        rep.cases.push_back(c);
    }

    if (!gen.y_independent) {
        CaseRecord c;
        c.case_id = "5.3/y_dependence_detected";
        c.statistic = max_disc;
        c.threshold = 0.0;
        c.pass = any_violation;
        c.witness = max_witness;
        c.note = "contrapositive of (ii) => (i): some shift must violate additivity";
        rep.cases.push_back(c);
        return rep;
    }

    // Conditional form (iii) with eta = tanh(B_{T/2}) at t = T/2.
    const double t_half = 0.5 * env.horizon;
    const TerminalFunctional with_eta = terminal_plus_function_of_brownian(
        terminal, t_half, [](double b) { return std::tanh(b); }, 1.0, "tanh(B_half)");
    const BsdeSolution lifted = solve_bsde(gen, with_eta, ws.paths, ws.bundle, nullptr, env.cfg);
    const std::size_t node = node_of_time(ws.paths.grid, t_half);
    std::vector<double> diffs(env.n_paths);
    for (std::size_t p = 0; p < env.n_paths; ++p) {
        const double eta = std::tanh(ws.bundle.brownian(p, node, 0));
        diffs[p] = lifted.y_at(p, node) - base.y_at(p, node) - eta;
    }
    double mean, se;
    mean_se_of(diffs, mean, se);
    CaseRecord c;
    c.case_id = "5.3(iii)/eta=tanh(B_half)";
    c.statistic = std::abs(mean);
    c.se = se;
    c.threshold = 3.0 * se + 0.02;
    c.pass = std::abs(mean) <= c.threshold;
    rep.cases.push_back(c);
    return rep;
}

PropertyReport horizon_consistency_check(const GeneratorSpec& gen,
                                         const TerminalFunctional& terminal_at_stop,
                                         const StopSpec& stop, const GexpEnvironment& env) {
    require_audit(gen, env.horizon, env.dim, "horizon_consistency_check");

    PropertyReport rep;
    rep.theorem_id = "consistency-24-25";
    rep.notes = "the stopped-consistency identity is probed in its symmetric reading: "
                "both horizon arms are compared against each other rather than against a "
                "preferred side";

    const Workspace ws = make_workspace(env);
    const std::size_t big_n = ws.paths.grid.n_steps;

    ExitTimes stops;
    stops.cap = stop.cap;
    stops.horizon_index = big_n;
    stops.capped.assign(env.n_paths, 0);
    if (stop.kind == StopSpec::Kind::Deterministic) {
        const std::size_t node = node_of_time(ws.paths.grid, stop.time);
        if (node == 0) throw BadParameters("horizon_consistency_check: sigma must be positive");
        stops.exit_index.assign(env.n_paths, node);
    } else {
        stops = first_exit(ws.paths, stop.cap);
    }

    // The sigma-measurable terminal: the base rule evaluated at each path's
    // stop node regardless of the slice's own terminal node.  Its running
    // value (frozen from sigma on) is exposed as a regression feature; without
    // it the full-horizon arm would project onto the sub-sigma-algebra of the
    // current state and the two arms could not agree.
    const std::vector<std::size_t> stop_nodes = stops.exit_index;
    auto base_rule = terminal_at_stop.rule;
    TerminalFunctional lifted;
    lifted.name = terminal_at_stop.name + "@sigma";
    lifted.bound = terminal_at_stop.bound;
    lifted.uses_brownian = terminal_at_stop.uses_brownian;
    lifted.rule = [base_rule, stop_nodes, big_n](const PathSlice& p) {
        PathSlice at_stop = p;
        at_stop.terminal_node = std::min(stop_nodes[p.path], big_n);
        return base_rule(at_stop);
    };
    lifted.state_features.push_back([base_rule, stop_nodes, big_n](const PathSlice& p) {
        PathSlice running = p;
        running.terminal_node = std::min({p.terminal_node, stop_nodes[p.path], big_n});
        return base_rule(running);
    });
    // Exit indicator: lets one fitted polynomial hold the frozen branch and
    // the still-running branch apart (constant column pre-stop, dropped).
    lifted.state_features.push_back([stop_nodes](const PathSlice& p) {
        return stop_nodes[p.path] <= p.terminal_node ? 1.0 : 0.0;
    });

    // Side A: horizon T, terminal lifted, generator active everywhere.
    const BsdeSolution full = solve_bsde(gen, lifted, ws.paths, ws.bundle, nullptr, env.cfg);
    // Side B: horizon sigma, paths absorbed at the stop.
    const BsdeSolution stopped = solve_bsde(gen, lifted, ws.paths, ws.bundle, &stops, env.cfg);

    double worst = 0.0, worst_se = 0.0, worst_thr = 0.0;
    std::size_t worst_node = 0;
    for (std::size_t i = 0; i <= big_n; ++i) {
        std::vector<double> diffs;
        diffs.reserve(env.n_paths);
        for (std::size_t p = 0; p < env.n_paths; ++p) {
            if (stop_nodes[p] >= i) diffs.push_back(std::abs(full.y_at(p, i) - stopped.y_at(p, i)));
        }
        if (diffs.size() < 2) continue;
        double mean, se;
        mean_se_of(diffs, mean, se);
        const double thr = 3.0 * se + 0.02;
        if (mean > worst) {
            worst = mean;
            worst_se = se;
            worst_thr = thr;
            worst_node = i;
        }
    }

    CaseRecord c;
    c.case_id = std::string("24/") +
                (stop.kind == StopSpec::Kind::Deterministic ? "deterministic_sigma" : "first_exit_sigma");
    c.statistic = worst;
    c.se = worst_se;
    c.threshold = worst_thr;
    c.pass = worst <= worst_thr;
    c.witness = "node=" + std::to_string(worst_node);
    rep.cases.push_back(c);
    return rep;
}

} // namespace qbsde
