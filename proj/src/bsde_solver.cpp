#include "qbsde/bsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qbsde/errors.hpp"

namespace qbsde {

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

// Cumulative Brownian values per path for fast node access.
std::vector<double> cumulative_brownian(const PathBundle& bundle) {
    const std::size_t n_nodes = bundle.grid.n_steps + 1;
    std::vector<double> cum(bundle.n_paths * n_nodes * bundle.dim, 0.0);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        for (std::size_t i = 1; i < n_nodes; ++i) {
            for (std::size_t c = 0; c < bundle.dim; ++c) {
                cum[(p * n_nodes + i) * bundle.dim + c] =
                    cum[(p * n_nodes + i - 1) * bundle.dim + c] + bundle.increment(p, i - 1, c);
            }
        }
    }
    return cum;
}

} // namespace

TerminalFunctional terminal_constant(double c) {
    return {"constant(" + std::to_string(c) + ")",
            [c](const PathSlice&) { return c; }, std::abs(c), false, {}};
}

TerminalFunctional terminal_brownian_endpoint(double declared_bound) {
    return {"brownian_endpoint",
            [](const PathSlice& p) { return p.brownian_terminal(0); }, declared_bound, true, {}};
}

TerminalFunctional terminal_state_endpoint(double declared_bound, std::size_t comp) {
    return {"state_endpoint",
            [comp](const PathSlice& p) { return p.x_terminal(comp); }, declared_bound, false, {}};
}

TerminalFunctional terminal_abs_brownian_capped(double cap) {
    return {"abs_brownian_capped(" + std::to_string(cap) + ")",
            [cap](const PathSlice& p) { return std::min(std::abs(p.brownian_terminal(0)), cap); },
            cap, true, {}};
}

TerminalFunctional terminal_cos_brownian() {
    return {"cos_brownian",
            [](const PathSlice& p) { return std::cos(p.brownian_terminal(0)); }, 1.0, true, {}};
}

TerminalFunctional terminal_smoothed_indicator(double sharpness) {
    return {"smoothed_indicator",
            [sharpness](const PathSlice& p) {
                return 0.5 * (1.0 + std::tanh(sharpness * p.brownian_terminal(0)));
            },
            1.0, true, {}};
}

TerminalFunctional terminal_shifted(const TerminalFunctional& base, double shift) {
    TerminalFunctional t;
    t.name = base.name + "+" + std::to_string(shift);
    auto rule = base.rule;
    t.rule = [rule, shift](const PathSlice& p) { return rule(p) + shift; };
    t.bound = base.bound + std::abs(shift);
    t.uses_brownian = base.uses_brownian;
    return t;
}

TerminalFunctional terminal_scaled(const TerminalFunctional& base, double scale) {
    TerminalFunctional t;
    t.name = std::to_string(scale) + "*" + base.name;
    auto rule = base.rule;
    t.rule = [rule, scale](const PathSlice& p) { return scale * rule(p); };
    t.bound = std::abs(scale) * base.bound;
    t.uses_brownian = base.uses_brownian;
    return t;
}

TerminalFunctional terminal_plus_function_of_brownian(const TerminalFunctional& base, double t_eta,
                                                      std::function<double(double)> eta,
                                                      double eta_bound, const std::string& label) {
    TerminalFunctional t;
    t.name = base.name + "+" + label;
    auto rule = base.rule;
    t.rule = [rule, eta, t_eta](const PathSlice& p) {
        const TimeGrid& g = p.grid();
        const auto node = static_cast<std::size_t>(
            std::llround((t_eta - g.start) / g.step()));
        return rule(p) + eta(p.brownian(node, 0));
    };
    t.bound = base.bound + eta_bound;
    t.uses_brownian = true;
    t.state_features = base.state_features;
    // eta(B_{t_eta}) is frozen at an interior time: condition on its running
    // value so the backward projections respect the filtration.
    t.state_features.push_back([eta, t_eta](const PathSlice& p) {
        const TimeGrid& g = p.grid();
        const auto eta_node = static_cast<std::size_t>(
            std::llround((t_eta - g.start) / g.step()));
        return eta(p.brownian(std::min(p.terminal_node, eta_node), 0));
    });
    return t;
}

void BsdeSolution::node_mean_se(std::size_t node, double& mean, double& se) const {
    std::vector<double> vals(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) vals[p] = y_at(p, node);
    mean = mean_of(vals);
    se = sd_of(vals, mean) / std::sqrt(static_cast<double>(n_paths));
}

BsdeSolution solve_bsde(const GeneratorSpec& gen, const TerminalFunctional& terminal,
                        const StatePaths& paths, const PathBundle& bundle,
                        const ExitTimes* exit_times, const RegressionConfig& cfg) {
    if (paths.n_paths != bundle.n_paths || paths.grid.n_steps != bundle.grid.n_steps) {
        throw DimensionMismatch("solve_bsde: paths and bundle must share one grid");
    }
    const std::size_t n = paths.n_paths;
    const std::size_t big_n = paths.grid.n_steps;
    const std::size_t d = bundle.dim;
    const std::size_t m = paths.m;
    const double h = paths.grid.step();
    const double span = paths.grid.span();

    BsdeSolution sol;
    sol.grid = paths.grid;
    sol.n_paths = n;
    sol.dim = d;
    sol.y.assign(n * (big_n + 1), 0.0);
    sol.z.assign(n * (big_n + 1) * d, 0.0);
    sol.term_node.resize(n);
    sol.diag.picard_iters.assign(big_n, 0);
    sol.diag.regression_residual.assign(big_n, 0.0);

    const double alpha_plus = std::max(gen.params.alpha, 0.0);
    const double band = (terminal.bound + std::abs(gen.params.b) * span) * std::exp(alpha_plus * span);
    sol.diag.band = band;
    double z_cap = cfg.z_max.value_or(10.0 * (1.0 + terminal.bound));
    if (!gen.y_independent) {
        // y-coupled drivers: keep the implicit map y -> E + h g(t,y,Z)
        // contractive, h (|g1| + l(band) |Z|^2) <= 1/2.  Without this cap,
        // noise spikes in the fitted Z rectify into per-path Y junk that
        // feeds back through the next regression and ignites.
        const double g1_range = std::max(std::abs(gen.params.alpha), std::abs(gen.params.beta));
        const double l_band = gen.params.l(band);
        if (l_band > 0.0 && 0.5 / h > g1_range) {
            z_cap = std::min(z_cap, std::sqrt((0.5 / h - g1_range) / l_band));
        }
    }
    sol.diag.z_max_used = z_cap;
    const double divergence_guard = 10.0 * std::max(band, 1.0);

    // Terminal values, audited against the declared bound.
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t term =
            exit_times ? std::min(exit_times->exit_index[p], big_n) : big_n;
        sol.term_node[p] = term;
        const double xi = terminal.rule(PathSlice{&paths, &bundle, p, term});
        if (std::abs(xi) > terminal.bound + 1e-12) ++sol.diag.terminal_bound_violations;
        for (std::size_t i = term; i <= big_n; ++i) sol.y[p * (big_n + 1) + i] = xi;
    }

    std::vector<double> cum_b;
    if (cfg.include_brownian_state) cum_b = cumulative_brownian(bundle);
    const std::size_t n_features = terminal.state_features.size();
    const std::size_t state_dim = m + (cfg.include_brownian_state ? d : 0) + n_features;

    std::size_t band_violations = 0;
    std::vector<std::size_t> alive;
    std::vector<double> state, target_y, target_z, zvec(d);

    for (std::size_t i = big_n; i-- > 0;) {
        const double t_i = paths.grid.node(i);
        alive.clear();
        for (std::size_t p = 0; p < n; ++p) {
            if (sol.term_node[p] > i) alive.push_back(p);
        }
        if (alive.empty()) continue;
        const std::size_t na = alive.size();

        state.resize(na * state_dim);
        target_y.resize(na);
        for (std::size_t j = 0; j < na; ++j) {
            const std::size_t p = alive[j];
            for (std::size_t c = 0; c < m; ++c) state[j * state_dim + c] = paths.value(p, i, c);
            std::size_t col = m;
            if (cfg.include_brownian_state) {
                for (std::size_t c = 0; c < d; ++c) {
                    state[j * state_dim + col + c] = cum_b[(p * (big_n + 1) + i) * d + c];
                }
                col += d;
            }
            for (std::size_t f = 0; f < n_features; ++f) {
                state[j * state_dim + col + f] =
                    terminal.state_features[f](PathSlice{&paths, &bundle, p, i});
            }
            target_y[j] = sol.y[p * (big_n + 1) + i + 1];
        }

        RegressionDesign design(state, na, state_dim, cfg.basis_degree);
        RegressionResult fit_y = design.solve(target_y);
        sol.diag.regression_residual[i] = fit_y.residual_rms;
        if (design.rank_deficient()) ++sol.diag.rank_deficient_nodes;

        // Z regression with the conditional mean subtracted from the target:
        // same estimand (the subtracted term integrates to zero against dB),
        // but the residual variance loses its 1/step blow-up.
        std::vector<RegressionResult> fit_z(d);
        for (std::size_t c = 0; c < d; ++c) {
            target_z.resize(na);
            for (std::size_t j = 0; j < na; ++j) {
                const std::size_t p = alive[j];
                target_z[j] = (target_y[j] - fit_y.fitted[j]) * bundle.increment(p, i, c) / h;
            }
            fit_z[c] = design.solve(target_z);
        }

        int max_iters = 0;
        for (std::size_t j = 0; j < na; ++j) {
            const std::size_t p = alive[j];
            double zn2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                zvec[c] = fit_z[c].fitted[j];
                zn2 += zvec[c] * zvec[c];
            }
            const double zn = std::sqrt(zn2);
            if (zn > z_cap) {
                const double s = z_cap / zn;
                for (double& v : zvec) v *= s;
                ++sol.diag.truncation_hits;
            }
            for (std::size_t c = 0; c < d; ++c) {
                sol.z[(p * (big_n + 1) + i) * d + c] = zvec[c];
            }

            // Implicit Y-step by Picard iteration from the projected value.
            const double base = fit_y.fitted[j];
            const std::span<const double> zs(zvec.data(), d);
            double y_cur = base;
            bool converged = false;
            int it = 0;
            for (; it < cfg.picard_max_iters; ++it) {
                const double y_next = base + h * gen.g(t_i, y_cur, zs);
                const double delta = std::abs(y_next - y_cur);
                y_cur = y_next;
                if (std::abs(y_cur) > divergence_guard) {
                    throw PicardDiverged("solve_bsde: Picard iterate exceeded 10x the a-priori band at node " +
                                         std::to_string(i));
                }
                if (delta <= cfg.picard_tol) {
                    converged = true;
                    ++it;
                    break;
                }
            }
            if (!converged) {
                // The map left its contraction regime (large truncated |Z|
                // with a y-coupled driver).  A root of y = base + h g(t,y,z)
                // still exists inside base +- h sup|g|; take it by bisection.
                const double m_bound =
                    std::abs(gen.params.b) +
                    (std::abs(gen.params.alpha) + std::abs(gen.params.beta)) * divergence_guard +
                    gen.params.l(divergence_guard) * z_cap * z_cap + 1.0;
                double lo = base - h * m_bound, hi = base + h * m_bound;
                auto residual = [&](double yv) { return yv - base - h * gen.g(t_i, yv, zs); };
                double flo = residual(lo);
                for (int b = 0; b < 200; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = residual(mid);
                    if ((flo <= 0.0) == (fm <= 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if (hi - lo <= cfg.picard_tol) break;
                }
                y_cur = 0.5 * (lo + hi);
            }
            max_iters = std::max(max_iters, it);

            if (std::abs(y_cur) > band + 1e-6) ++band_violations;
            if (cfg.clip_y && std::abs(y_cur) > band) {
                y_cur = std::clamp(y_cur, -band, band);
                ++sol.diag.clip_hits;
            }
            sol.y[p * (big_n + 1) + i] = y_cur;
        }
        sol.diag.picard_iters[i] = max_iters;

        if (i == 0) {
            const double mu = mean_of(target_y);
            sol.diag.se_y0 = sd_of(target_y, mu) / std::sqrt(static_cast<double>(na));
        }
    }

    sol.diag.band_violation_fraction =
        static_cast<double>(band_violations) / static_cast<double>(n * (big_n + 1));
    return sol;
}

OracleValues solve_colehopf(double gamma, const TerminalFunctional& terminal,
                            const StatePaths& paths, const PathBundle& bundle, int basis_degree) {
    if (gamma == 0.0) throw BadParameters("solve_colehopf: gamma must be nonzero");
    const std::size_t n = paths.n_paths;
    const std::size_t big_n = paths.grid.n_steps;
    const std::size_t m = paths.m;

    OracleValues out;
    out.n_nodes = big_n + 1;
    out.y.assign(n * (big_n + 1), 0.0);

    std::vector<double> xi(n), w(n);
    for (std::size_t p = 0; p < n; ++p) {
        xi[p] = terminal.rule(PathSlice{&paths, &bundle, p, big_n});
        w[p] = std::exp(gamma * xi[p]);
        out.y[p * (big_n + 1) + big_n] = xi[p];
    }
    // Conditional expectations stay inside the hard exponential range of xi.
    const double w_floor = std::exp(-std::abs(gamma) * terminal.bound);
    const double w_ceil = std::exp(std::abs(gamma) * terminal.bound);

    std::vector<double> state(n * m);
    for (std::size_t i = 1; i < big_n; ++i) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t c = 0; c < m; ++c) state[p * m + c] = paths.value(p, i, c);
        }
        RegressionResult fit = regress_condexp(w, state, n, m, basis_degree);
        for (std::size_t p = 0; p < n; ++p) {
            const double cond = std::clamp(fit.fitted[p], w_floor, w_ceil);
            out.y[p * (big_n + 1) + i] = std::log(cond) / gamma;
        }
    }

    const double mu = mean_of(w);
    const double sd = sd_of(w, mu);
    out.y0 = std::log(mu) / gamma;
    out.se0 = sd / std::sqrt(static_cast<double>(n)) / (std::abs(gamma) * mu);
    for (std::size_t p = 0; p < n; ++p) out.y[p * (big_n + 1) + 0] = out.y0;
    return out;
}

OracleValues solve_linear_oracle(double a, double c, double w, const TerminalFunctional& terminal,
                                 const StatePaths& paths, const PathBundle& bundle,
                                 int basis_degree) {
    if (bundle.dim != 1) throw DimensionMismatch("solve_linear_oracle: requires d = 1");
    const std::size_t n = paths.n_paths;
    const std::size_t big_n = paths.grid.n_steps;
    const std::size_t m = paths.m;

    OracleValues out;
    out.n_nodes = big_n + 1;
    out.y.assign(n * (big_n + 1), 0.0);

    const auto cum_b = cumulative_brownian(bundle);
    std::vector<double> xi(n);
    for (std::size_t p = 0; p < n; ++p) {
        xi[p] = terminal.rule(PathSlice{&paths, &bundle, p, big_n});
        out.y[p * (big_n + 1) + big_n] = xi[p];
    }

    auto driver_integral = [a, c](double s) {
        if (std::abs(a) < 1e-14) return c * s;
        return (c / a) * std::expm1(a * s);
    };

    std::vector<double> target(n), state(n * m);
    for (std::size_t i = 0; i < big_n; ++i) {
        const double span_i = paths.grid.end - paths.grid.node(i);
        for (std::size_t p = 0; p < n; ++p) {
            const double b_gap = cum_b[p * (big_n + 1) + big_n] - cum_b[p * (big_n + 1) + i];
            target[p] = xi[p] * std::exp(w * b_gap - 0.5 * w * w * span_i);
        }
        const double growth = std::exp(a * span_i);
        if (i == 0) {
            const double mu = mean_of(target);
            const double sd = sd_of(target, mu);
            out.y0 = growth * mu + driver_integral(span_i);
            out.se0 = growth * sd / std::sqrt(static_cast<double>(n));
            for (std::size_t p = 0; p < n; ++p) out.y[p * (big_n + 1)] = out.y0;
        } else {
            for (std::size_t p = 0; p < n; ++p) {
                for (std::size_t cc = 0; cc < m; ++cc) state[p * m + cc] = paths.value(p, i, cc);
            }
            RegressionResult fit = regress_condexp(target, state, n, m, basis_degree);
            for (std::size_t p = 0; p < n; ++p) {
                out.y[p * (big_n + 1) + i] = growth * fit.fitted[p] + driver_integral(span_i);
            }
        }
    }
    return out;
}

} // namespace qbsde
