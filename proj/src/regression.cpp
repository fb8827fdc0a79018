#include "qbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qbsde/errors.hpp"

namespace qbsde {

namespace {

// Exponent tuples with total degree <= degree over `dims` variables,
// enumerated in a fixed order so results are deterministic.
void enumerate_monomials(std::size_t dims, int degree, std::vector<int>& current,
                         std::vector<std::vector<int>>& out, int used) {
    if (current.size() == dims) {
        out.push_back(current);
        return;
    }
    for (int e = 0; e + used <= degree; ++e) {
        current.push_back(e);
        enumerate_monomials(dims, degree, current, out, used + e);
        current.pop_back();
    }
}

// Cholesky in place; returns false when a pivot is not safely positive.
bool cholesky(std::vector<double>& a, std::size_t n) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
    const double floor = std::max(max_diag, 1.0) * 1e-13;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > floor)) return false;
        const double s = std::sqrt(d);
        a[j * n + j] = s;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / s;
        }
    }
    return true;
}

void chol_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& rhs) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = rhs[i];
        for (std::size_t k = 0; k < i; ++k) v -= l[i * n + k] * rhs[k];
        rhs[i] = v / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double v = rhs[ii];
        for (std::size_t k = ii + 1; k < n; ++k) v -= l[k * n + ii] * rhs[k];
        rhs[ii] = v / l[ii * n + ii];
    }
}

} // namespace

RegressionDesign::RegressionDesign(std::span<const double> state, std::size_t n_rows,
                                   std::size_t state_dim, int degree)
    : n_rows_(n_rows) {
    if (n_rows == 0) throw BadParameters("regression: empty sample");

    // Standardize columns; drop those without variation.
    std::vector<double> mean(state_dim, 0.0), sd(state_dim, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < state_dim; ++c) mean[c] += state[r * state_dim + c];
    for (double& v : mean) v /= static_cast<double>(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < state_dim; ++c) {
            const double d = state[r * state_dim + c] - mean[c];
            sd[c] += d * d;
        }
    std::vector<std::size_t> live_cols;
    for (std::size_t c = 0; c < state_dim; ++c) {
        sd[c] = std::sqrt(sd[c] / static_cast<double>(n_rows));
        if (sd[c] > 1e-12 * (1.0 + std::abs(mean[c]))) live_cols.push_back(c);
    }

    std::vector<std::vector<int>> monos;
    std::vector<int> scratch;
    enumerate_monomials(live_cols.size(), degree, scratch, monos, 0);
    basis_size_ = monos.size();

    design_.resize(n_rows * basis_size_);
    std::vector<double> zrow(live_cols.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < live_cols.size(); ++j) {
            const std::size_t c = live_cols[j];
            zrow[j] = (state[r * state_dim + c] - mean[c]) / sd[c];
        }
        for (std::size_t k = 0; k < basis_size_; ++k) {
            double v = 1.0;
            for (std::size_t j = 0; j < live_cols.size(); ++j) {
                for (int e = 0; e < monos[k][j]; ++e) v *= zrow[j];
            }
            design_[r * basis_size_ + k] = v;
        }
    }

    // Gram matrix assembled in fixed path order (determinism contract).
    const std::size_t k = basis_size_;
    std::vector<double> gram(k * k, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = design_.data() + r * k;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j <= i; ++j) gram[i * k + j] += row[i] * row[j];
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) gram[i * k + j] = gram[j * k + i];

    chol_ = gram;
    if (!cholesky(chol_, k)) {
        rank_deficient_ = true;
        double trace = 0.0;
        for (std::size_t i = 0; i < k; ++i) trace += gram[i * k + i];
        const double ridge = 1e-10 * (trace / static_cast<double>(k) + 1.0);
        chol_ = gram;
        for (std::size_t i = 0; i < k; ++i) chol_[i * k + i] += ridge;
        if (!cholesky(chol_, k)) {
            throw std::runtime_error("regression: Gram matrix not factorizable even with ridge");
        }
    }
}

RegressionResult RegressionDesign::solve(std::span<const double> targets) const {
    if (targets.size() != n_rows_) throw DimensionMismatch("regression: target size mismatch");
    const std::size_t k = basis_size_;
    std::vector<double> rhs(k, 0.0);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        const double* row = design_.data() + r * k;
        for (std::size_t i = 0; i < k; ++i) rhs[i] += row[i] * targets[r];
    }
    chol_solve(chol_, k, rhs);

    RegressionResult res;
    res.rank_deficient = rank_deficient_;
    res.basis_size = k;
    res.fitted.resize(n_rows_);
    double ss = 0.0;
    for (std::size_t r = 0; r < n_rows_; ++r) {
        const double* row = design_.data() + r * k;
        double v = 0.0;
        for (std::size_t i = 0; i < k; ++i) v += row[i] * rhs[i];
        res.fitted[r] = v;
        const double e = targets[r] - v;
        ss += e * e;
    }
    res.residual_rms = std::sqrt(ss / static_cast<double>(n_rows_));
    return res;
}

RegressionResult regress_condexp(std::span<const double> targets, std::span<const double> state,
                                 std::size_t n_rows, std::size_t state_dim, int degree) {
    RegressionDesign design(state, n_rows, state_dim, degree);
    return design.solve(targets);
}

} // namespace qbsde
