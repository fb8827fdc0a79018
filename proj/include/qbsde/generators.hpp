#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qbsde {

// Nondecreasing nonnegative function l on [0, inf), represented as a
// polynomial with nonnegative coefficients.
struct LFunction {
    std::vector<double> coeffs; // l(u) = sum coeffs[k] * u^k

    double operator()(double u) const {
        double acc = 0.0, pw = 1.0;
        for (double c : coeffs) {
            acc += c * pw;
            pw *= u;
        }
        return acc;
    }
};

// Growth metadata of (A2) plus the declarative flags (A3)/(A4)/(A5).
// The flags are declarations only; they gate which property probes apply and
// are never verified symbolically.
struct AssumptionParams {
    double alpha = 0.0; // upper bound on g1
    double beta = 0.0;  // lower bound on g1
    double b = 0.0;     // constant term in the g2 bound
    LFunction l;        // |g2| <= b + l(|y|) |z|^2
    bool a3 = false;
    bool a4 = false;
    bool a5 = false;

    // lambda_M = max{|alpha|, |beta|, |b|, l(M)}
    double lambda(double big_m) const;
};

using DriverPart = std::function<double(double t, double y, std::span<const double> z)>;

// Driver g(t,y,z) = g1(t,y,z)*y + g2(t,y,z) together with its declared
// growth metadata.  Evaluation rules must be pure.
struct GeneratorSpec {
    std::string name;
    DriverPart g1;
    DriverPart g2;
    AssumptionParams params;
    bool y_independent = false; // g does not depend on y (drives Theorem 5.3 branches)

    double g(double t, double y, std::span<const double> z) const {
        return g1(t, y, z) * y + g2(t, y, z);
    }
    double g(double t, double y, double z_scalar) const {
        return g(t, y, std::span<const double>(&z_scalar, 1));
    }
};

GeneratorSpec instantiate_generator(const std::string& name, const std::vector<double>& parameters);
std::vector<std::string> generator_catalog_names();

// Audit sample: deterministic lattice / low-discrepancy points in
// [0,T] x [-y_span, y_span] x [-z_span, z_span]^d.
struct AuditPoint {
    double t = 0.0;
    double y = 0.0;
    std::vector<double> z;
};

std::vector<AuditPoint> standard_audit_grid(double horizon, std::size_t dim,
                                            std::size_t n_points = 100000,
                                            double y_span = 10.0, double z_span = 10.0);

// Empirical (A2)/(A2)*/(A5) audit on a finite sample.  Violations are report
// content, never exceptions.
struct AuditReport {
    double g1_violation = 0.0;     // max of max(beta - g1, g1 - alpha, 0)
    double g2_violation = 0.0;     // max of |g2| - (b + l(|y|)|z|^2)
    double growth_violation = 0.0; // max of |g| - lambda_M (1 + |y| + |z|^2)
    double a5_violation = 0.0;     // max |g(t,y,0)| when A5 flagged
    double lambda_m = 0.0;         // lambda at M = max sampled |y|
    double tolerance = 1e-12;
    AuditPoint worst_point;
    bool pass = false;
};

AuditReport check_assumptions(const GeneratorSpec& spec, const std::vector<AuditPoint>& sample);

enum class Ordering { LessOrEqual, GreaterOrEqual, Equal, Incomparable };

struct ComparisonVerdict {
    Ordering ordering = Ordering::Equal;
    bool strict = false;        // some point differs beyond tolerance
    AuditPoint witness_above;   // point with a(t,y,z) > b(t,y,z), when any
    AuditPoint witness_below;   // point with a(t,y,z) < b(t,y,z), when any
    double max_above = 0.0;     // max (a - b)
    double max_below = 0.0;     // max (b - a)
};

ComparisonVerdict compare_on_grid(const GeneratorSpec& a, const GeneratorSpec& b,
                                  const std::vector<AuditPoint>& sample, double tol = 1e-12);

} // namespace qbsde
