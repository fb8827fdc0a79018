#pragma once

#include <cstddef>
#include <vector>

#include "qbsde/rng.hpp"

namespace qbsde {

// Uniform time discretization of [start, end].  Nodes are computed by
// multiplication (never by repeated addition) and node(n_steps) returns the
// endpoint exactly.
struct TimeGrid {
    double start = 0.0;
    double end = 1.0;
    std::size_t n_steps = 1;

    double step() const { return (end - start) / static_cast<double>(n_steps); }
    double span() const { return end - start; }
    std::size_t n_nodes() const { return n_steps + 1; }

    double node(std::size_t i) const {
        return i == n_steps ? end : start + static_cast<double>(i) * step();
    }
};

TimeGrid make_grid(double start, double end, std::size_t n_steps);

// Seeded batch of d-dimensional Brownian increments on a grid.  Increments
// are stored (not cumulative values); B is reconstructed on demand because
// the BSDE schemes consume increments directly.
struct PathBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t dim = 0;
    std::vector<double> increments; // [path][step][component]

    double increment(std::size_t path, std::size_t step_idx, std::size_t comp) const {
        return increments[(path * grid.n_steps + step_idx) * dim + comp];
    }

    // B at grid node i, component c, with B(start) = 0.
    double brownian(std::size_t path, std::size_t node, std::size_t comp) const {
        double b = 0.0;
        for (std::size_t s = 0; s < node; ++s) b += increment(path, s, comp);
        return b;
    }
};

PathBundle sample_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t dim,
                           const RngPolicy& rng);

} // namespace qbsde
