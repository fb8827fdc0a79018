#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qbsde {

// Least-squares projection onto polynomials of total degree <= degree in the
// state variables.  Columns are standardized and near-constant columns are
// dropped, so a degenerate state (all paths at one point) degrades cleanly to
// the plain sample mean.  Rank deficiency is signaled, not thrown: the solve
// falls back to ridge with penalty 1e-10 * trace-scale.
struct RegressionResult {
    std::vector<double> fitted;
    double residual_rms = 0.0;
    bool rank_deficient = false;
    std::size_t basis_size = 0;
};

// Precomputed design for one regression state; factor once, reuse for several
// targets (the solver regresses Y and each Z component against one state).
class RegressionDesign {
public:
    // state: row-major n_rows x state_dim.
    RegressionDesign(std::span<const double> state, std::size_t n_rows, std::size_t state_dim,
                     int degree);

    RegressionResult solve(std::span<const double> targets) const;

    std::size_t n_rows() const { return n_rows_; }
    std::size_t basis_size() const { return basis_size_; }
    bool rank_deficient() const { return rank_deficient_; }

private:
    std::size_t n_rows_ = 0;
    std::size_t basis_size_ = 0;
    bool rank_deficient_ = false;
    std::vector<double> design_;  // n_rows x basis_size, column-major basis blocks
    std::vector<double> chol_;    // Cholesky factor of the (possibly ridged) Gram matrix
};

RegressionResult regress_condexp(std::span<const double> targets, std::span<const double> state,
                                 std::size_t n_rows, std::size_t state_dim, int degree);

} // namespace qbsde
