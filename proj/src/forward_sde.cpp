#include "qbsde/forward_sde.hpp"

#include <algorithm>
#include <cmath>

#include "qbsde/errors.hpp"

namespace qbsde {

namespace {

double vec_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

std::vector<double> SdeCoefficients::sigma_transpose_q(double t, std::span<const double> x,
                                                       std::span<const double> q,
                                                       std::size_t dim) const {
    std::vector<double> sig(m * dim);
    diffusion(t, x, sig);
    std::vector<double> out(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < m; ++r) acc += sig[r * dim + c] * q[r];
        out[c] = acc;
    }
    return out;
}

SdeCoefficients instantiate_coefficients(const std::string& name,
                                         const std::vector<double>& parameters, std::size_t m) {
    SdeCoefficients c;
    c.name = name;
    c.m = m;
    auto fill_identity = [](std::span<double> out, std::size_t rows, double scale) {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t dim = out.size() / rows;
        for (std::size_t r = 0; r < rows && r < dim; ++r) out[r * dim + r] = scale;
    };

    if (name == "zero_drift_unit_diffusion") {
        if (!parameters.empty()) throw BadParameters("zero_drift_unit_diffusion takes no parameters");
        c.drift = [](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        c.diffusion = [m, fill_identity](double, std::span<const double>, std::span<double> out) {
            fill_identity(out, m, 1.0);
        };
        c.mu = 0.0;
        c.nu = 1.0;
        return c;
    }
    if (name == "ou") {
        if (!parameters.empty()) throw BadParameters("ou takes no parameters");
        c.drift = [](double, std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
        };
        c.diffusion = [m, fill_identity](double, std::span<const double>, std::span<double> out) {
            fill_identity(out, m, 1.0);
        };
        c.mu = 1.0;
        c.nu = 1.0;
        return c;
    }
    if (name == "scaled_linear") {
        if (parameters.size() != 2) throw BadParameters("scaled_linear expects (a_b, a_sigma)");
        const double ab = parameters[0], as = parameters[1];
        c.drift = [ab](double, std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = ab * x[i];
        };
        c.diffusion = [m, as](double, std::span<const double> x, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            const std::size_t dim = out.size() / m;
            for (std::size_t r = 0; r < m && r < dim; ++r) out[r * dim + r] = as * x[r];
        };
        c.mu = std::abs(ab) + std::abs(as);
        c.nu = std::abs(ab) + std::abs(as);
        return c;
    }
    if (name == "constant_drift_unit_diffusion") {
        if (parameters.size() != 1) throw BadParameters("constant_drift_unit_diffusion expects (c)");
        const double cd = parameters[0];
        c.drift = [cd](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), cd);
        };
        c.diffusion = [m, fill_identity](double, std::span<const double>, std::span<double> out) {
            fill_identity(out, m, 1.0);
        };
        c.mu = 0.0;
        c.nu = std::abs(cd) + 1.0;
        return c;
    }
    if (name == "frozen") {
        if (!parameters.empty()) throw BadParameters("frozen takes no parameters");
        c.drift = [](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        c.diffusion = [](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
        c.mu = 0.0;
        c.nu = 0.0;
        return c;
    }
    throw UnknownGenerator("unknown sde coefficients '" + name + "'");
}

std::vector<std::string> coefficient_catalog_names() {
    return {"zero_drift_unit_diffusion", "ou", "scaled_linear", "constant_drift_unit_diffusion",
            "frozen"};
}

CoefficientAuditReport audit_coefficients(const SdeCoefficients& coeffs, std::size_t dim,
                                          double horizon, double x_span, std::size_t n_points) {
    CoefficientAuditReport rep;
    const RngPolicy scramble{0xc0ffeeULL, 1};
    const std::size_t m = coeffs.m;
    std::vector<double> x(m), y(m), bx(m), by(m), sx(m * dim), sy(m * dim);
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t = horizon * u64_to_unit(scramble.word(i, 0));
        for (std::size_t r = 0; r < m; ++r) {
            x[r] = x_span * (2.0 * u64_to_unit(scramble.word(i, 1 + r)) - 1.0);
            y[r] = x_span * (2.0 * u64_to_unit(scramble.word(i, 1 + m + r)) - 1.0);
        }
        coeffs.drift(t, x, bx);
        coeffs.drift(t, y, by);
        coeffs.diffusion(t, x, sx);
        coeffs.diffusion(t, y, sy);

        std::vector<double> db(m), ds(m * dim), xy(m);
        for (std::size_t r = 0; r < m; ++r) db[r] = bx[r] - by[r];
        for (std::size_t r = 0; r < m * dim; ++r) ds[r] = sx[r] - sy[r];
        for (std::size_t r = 0; r < m; ++r) xy[r] = x[r] - y[r];

        const double lip = vec_norm(db) + vec_norm(ds) - coeffs.mu * vec_norm(xy);
        const double grw = vec_norm(bx) + vec_norm(sx) - coeffs.nu * (1.0 + vec_norm(x));
        rep.h1_violation = std::max(rep.h1_violation, lip);
        rep.h2_violation = std::max(rep.h2_violation, grw);
    }
    rep.pass = rep.h1_violation <= rep.tolerance && rep.h2_violation <= rep.tolerance;
    return rep;
}

double StatePaths::norm(std::size_t path, std::size_t node) const {
    return vec_norm(state(path, node));
}

StatePaths simulate_euler(const SdeCoefficients& coeffs, double start_time,
                          std::span<const double> start_state, const PathBundle& bundle) {
    if (start_state.size() != coeffs.m) {
        throw DimensionMismatch("simulate_euler: start_state dimension mismatch");
    }
    if (std::abs(bundle.grid.start - start_time) > 1e-12) {
        throw DimensionMismatch("simulate_euler: bundle grid must start at the start time");
    }

    const std::size_t m = coeffs.m;
    const std::size_t d = bundle.dim;
    const std::size_t n_nodes = bundle.grid.n_steps + 1;
    const double h = bundle.grid.step();

    StatePaths out;
    out.grid = bundle.grid;
    out.n_paths = bundle.n_paths;
    out.m = m;
    out.start_state.assign(start_state.begin(), start_state.end());
    out.values.resize(bundle.n_paths * n_nodes * m);

    std::vector<double> bvec(m), sig(m * d), xi(m);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        double* path_vals = out.values.data() + p * n_nodes * m;
        for (std::size_t c = 0; c < m; ++c) path_vals[c] = start_state[c];
        for (std::size_t i = 0; i + 1 < n_nodes; ++i) {
            const double t = bundle.grid.node(i);
            const std::span<const double> x(path_vals + i * m, m);
            coeffs.drift(t, x, bvec);
            coeffs.diffusion(t, x, sig);
            for (std::size_t r = 0; r < m; ++r) {
                double inc = bvec[r] * h;
                for (std::size_t c = 0; c < d; ++c) {
                    inc += sig[r * d + c] * bundle.increment(p, i, c);
                }
                path_vals[(i + 1) * m + r] = x[r] + inc;
            }
        }
    }
    return out;
}

double ExitTimes::capped_fraction() const {
    if (capped.empty()) return 0.0;
    double n = 0.0;
    for (char c : capped) n += (c != 0);
    return n / static_cast<double>(capped.size());
}

ExitTimes first_exit(const StatePaths& paths, double cap) {
    double start_norm = 0.0;
    for (std::size_t c = 0; c < paths.m; ++c) start_norm += paths.start_state[c] * paths.start_state[c];
    start_norm = std::sqrt(start_norm);
    if (start_norm >= cap) {
        throw CapTooSmall("first_exit: cap C0 must strictly exceed |start_state|");
    }

    ExitTimes exits;
    exits.cap = cap;
    exits.horizon_index = paths.grid.n_steps;
    exits.exit_index.resize(paths.n_paths, paths.grid.n_steps);
    exits.capped.assign(paths.n_paths, 0);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        for (std::size_t i = 1; i <= paths.grid.n_steps; ++i) {
            if (paths.norm(p, i) > cap) {
                exits.exit_index[p] = i;
                exits.capped[p] = 1;
                break;
            }
        }
    }
    return exits;
}

} // namespace qbsde
