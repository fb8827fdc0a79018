#include "qbsde/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qbsde/errors.hpp"
#include "qbsde/rng.hpp"

namespace qbsde {

namespace {

double sq_norm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return s;
}

GeneratorSpec make_zero() {
    GeneratorSpec spec;
    spec.name = "zero";
    spec.g1 = [](double, double, std::span<const double>) { return 0.0; };
    spec.g2 = [](double, double, std::span<const double>) { return 0.0; };
    spec.params.alpha = 0.0;
    spec.params.beta = 0.0;
    spec.params.b = 0.0;
    spec.params.l = LFunction{{}};
    spec.params.a3 = spec.params.a4 = spec.params.a5 = true;
    spec.y_independent = true;
    return spec;
}

GeneratorSpec make_linear(double a, double c) {
    GeneratorSpec spec;
    spec.name = "linear";
    spec.g1 = [a](double, double, std::span<const double>) { return a; };
    spec.g2 = [c](double, double, std::span<const double>) { return c; };
    spec.params.alpha = a;
    spec.params.beta = a;
    spec.params.b = std::abs(c);
    spec.params.l = LFunction{{}};
    spec.params.a3 = spec.params.a4 = true;
    spec.params.a5 = (a == 0.0 && c == 0.0);
    spec.y_independent = (a == 0.0);
    return spec;
}

GeneratorSpec make_pure_quadratic(double gamma) {
    GeneratorSpec spec;
    spec.name = "pure_quadratic";
    spec.g1 = [](double, double, std::span<const double>) { return 0.0; };
    spec.g2 = [gamma](double, double, std::span<const double> z) { return 0.5 * gamma * sq_norm(z); };
    spec.params.alpha = 0.0;
    spec.params.beta = 0.0;
    spec.params.b = 0.0;
    spec.params.l = LFunction{{0.5 * std::abs(gamma)}};
    spec.params.a3 = spec.params.a4 = spec.params.a5 = true;
    spec.y_independent = true;
    return spec;
}

GeneratorSpec make_siny_quadratic() {
    GeneratorSpec spec;
    spec.name = "siny_quadratic";
    spec.g1 = [](double, double, std::span<const double>) { return 0.0; };
    spec.g2 = [](double, double y, std::span<const double> z) { return std::sin(y) * sq_norm(z); };
    spec.params.alpha = 0.0;
    spec.params.beta = 0.0;
    spec.params.b = 0.0;
    spec.params.l = LFunction{{1.0}};
    spec.params.a3 = spec.params.a4 = spec.params.a5 = true;
    spec.y_independent = false;
    return spec;
}

GeneratorSpec make_affine_z(double a, double c, double w) {
    GeneratorSpec spec;
    spec.name = "affine_z";
    spec.g1 = [a](double, double, std::span<const double>) { return a; };
    spec.g2 = [c, w](double, double, std::span<const double> z) { return w * z[0] + c; };
    spec.params.alpha = a;
    spec.params.beta = a;
    // |w z + c| <= |c| + w^2/2 + |z|^2/2
    spec.params.b = std::abs(c) + 0.5 * w * w;
    spec.params.l = LFunction{{0.5}};
    spec.params.a3 = spec.params.a4 = true;
    spec.params.a5 = (a == 0.0 && c == 0.0 && w == 0.0);
    spec.y_independent = (a == 0.0);
    return spec;
}

void require_params(const std::string& name, const std::vector<double>& params, std::size_t n) {
    if (params.size() != n) {
        throw BadParameters("generator '" + name + "' expects " + std::to_string(n) +
                            " parameter(s), got " + std::to_string(params.size()));
    }
}

} // namespace

double AssumptionParams::lambda(double big_m) const {
    return std::max(std::max(std::abs(alpha), std::abs(beta)), std::max(std::abs(b), l(big_m)));
}

GeneratorSpec instantiate_generator(const std::string& name, const std::vector<double>& parameters) {
    if (name == "zero") {
        require_params(name, parameters, 0);
        return make_zero();
    }
    if (name == "linear") {
        require_params(name, parameters, 2);
        return make_linear(parameters[0], parameters[1]);
    }
    if (name == "pure_quadratic") {
        require_params(name, parameters, 1);
        return make_pure_quadratic(parameters[0]);
    }
    if (name == "siny_quadratic") {
        require_params(name, parameters, 0);
        return make_siny_quadratic();
    }
    if (name == "affine_z") {
        require_params(name, parameters, 3);
        return make_affine_z(parameters[0], parameters[1], parameters[2]);
    }
    throw UnknownGenerator("unknown generator '" + name + "'");
}

std::vector<std::string> generator_catalog_names() {
    return {"zero", "linear", "pure_quadratic", "siny_quadratic", "affine_z"};
}

std::vector<AuditPoint> standard_audit_grid(double horizon, std::size_t dim,
                                            std::size_t n_points,
                                            double y_span, double z_span) {
    std::vector<AuditPoint> sample;
    sample.reserve(n_points);
    // Deterministic scrambled lattice; fixed constant seed so audits are stable.
    const RngPolicy scramble{0x5eedf00dULL, 0};
    for (std::size_t i = 0; i < n_points; ++i) {
        AuditPoint pt;
        pt.t = horizon * u64_to_unit(scramble.word(i, 0));
        pt.y = y_span * (2.0 * u64_to_unit(scramble.word(i, 1)) - 1.0);
        pt.z.resize(dim);
        for (std::size_t c = 0; c < dim; ++c) {
            pt.z[c] = z_span * (2.0 * u64_to_unit(scramble.word(i, 2 + c)) - 1.0);
        }
        sample.push_back(std::move(pt));
    }
    // Always include the origin-in-z line so A5 checks hit z = 0 exactly.
    for (double y : {-y_span, -1.0, 0.0, 1.0, y_span}) {
        AuditPoint pt;
        pt.t = 0.5 * horizon;
        pt.y = y;
        pt.z.assign(dim, 0.0);
        sample.push_back(std::move(pt));
    }
    return sample;
}

AuditReport check_assumptions(const GeneratorSpec& spec, const std::vector<AuditPoint>& sample) {
    if (sample.empty()) throw BadParameters("check_assumptions: sample must be nonempty");

    AuditReport rep;
    double max_abs_y = 0.0;
    for (const auto& pt : sample) max_abs_y = std::max(max_abs_y, std::abs(pt.y));
    rep.lambda_m = spec.params.lambda(max_abs_y);

    double worst = -1.0;
    for (const auto& pt : sample) {
        const std::span<const double> z(pt.z.data(), pt.z.size());
        const double v1 = spec.g1(pt.t, pt.y, z);
        const double v2 = spec.g2(pt.t, pt.y, z);
        const double zz = sq_norm(z);

        const double g1_viol = std::max(spec.params.beta - v1, v1 - spec.params.alpha);
        const double g2_viol = std::abs(v2) - (std::abs(spec.params.b) + spec.params.l(std::abs(pt.y)) * zz);
        const double gv = std::abs(v1 * pt.y + v2) - rep.lambda_m * (1.0 + std::abs(pt.y) + zz);

        rep.g1_violation = std::max(rep.g1_violation, g1_viol);
        rep.g2_violation = std::max(rep.g2_violation, g2_viol);
        rep.growth_violation = std::max(rep.growth_violation, gv);

        double a5_viol = 0.0;
        if (spec.params.a5 && zz == 0.0) {
            a5_viol = std::abs(v1 * pt.y + v2);
            rep.a5_violation = std::max(rep.a5_violation, a5_viol);
        }
        const double local = std::max(std::max(g1_viol, g2_viol), std::max(gv, a5_viol));
        if (local > worst) {
            worst = local;
            rep.worst_point = pt;
        }
    }
    rep.pass = rep.g1_violation <= rep.tolerance && rep.g2_violation <= rep.tolerance &&
               rep.growth_violation <= rep.tolerance && rep.a5_violation <= rep.tolerance;
    return rep;
}

ComparisonVerdict compare_on_grid(const GeneratorSpec& a, const GeneratorSpec& b,
                                  const std::vector<AuditPoint>& sample, double tol) {
    if (sample.empty()) throw BadParameters("compare_on_grid: sample must be nonempty");

    ComparisonVerdict v;
    bool above = false, below = false;
    for (const auto& pt : sample) {
        const std::span<const double> z(pt.z.data(), pt.z.size());
        const double diff = a.g(pt.t, pt.y, z) - b.g(pt.t, pt.y, z);
        if (diff > tol) {
            if (diff > v.max_above) {
                v.max_above = diff;
                v.witness_above = pt;
            }
            above = true;
        } else if (diff < -tol) {
            if (-diff > v.max_below) {
                v.max_below = -diff;
                v.witness_below = pt;
            }
            below = true;
        }
    }
    if (above && below) {
        v.ordering = Ordering::Incomparable;
        v.strict = true;
    } else if (above) {
        v.ordering = Ordering::GreaterOrEqual;
        v.strict = true;
    } else if (below) {
        v.ordering = Ordering::LessOrEqual;
        v.strict = true;
    } else {
        v.ordering = Ordering::Equal;
        v.strict = false;
    }
    return v;
}

} // namespace qbsde
