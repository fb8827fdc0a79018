#include "qbsde/stochastic_core.hpp"

#include <cmath>
#include <string>

#include "qbsde/errors.hpp"

namespace qbsde {

TimeGrid make_grid(double start, double end, std::size_t n_steps) {
    if (!(start < end)) {
        throw DegenerateInterval("make_grid: start (" + std::to_string(start) +
                                 ") must be strictly below end (" + std::to_string(end) + ")");
    }
    if (n_steps < 1) {
        throw ZeroSteps("make_grid: n_steps must be >= 1");
    }
    return TimeGrid{start, end, n_steps};
}

PathBundle sample_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t dim,
                           const RngPolicy& rng) {
    if (n_paths < 1 || dim < 1) {
        throw DimensionMismatch("sample_brownian: n_paths and dim must be >= 1");
    }
    PathBundle bundle;
    bundle.grid = grid;
    bundle.n_paths = n_paths;
    bundle.dim = dim;
    bundle.increments.resize(n_paths * grid.n_steps * dim);

    const double sqrt_step = std::sqrt(grid.step());
    for (std::size_t p = 0; p < n_paths; ++p) {
        const std::size_t base = p * grid.n_steps * dim;
        for (std::size_t s = 0; s < grid.n_steps; ++s) {
            for (std::size_t c = 0; c < dim; ++c) {
                bundle.increments[base + s * dim + c] =
                    sqrt_step * rng.normal(p, s * dim + c);
            }
        }
    }
    return bundle;
}

} // namespace qbsde
