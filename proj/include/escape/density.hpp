#pragma once

#include <vector>

namespace escape {

/// Piecewise-constant density on an ordered list of cell edges.
///
/// values[i] is the density (mass per unit length) on [edges[i], edges[i+1]).
struct GridDensity {
    std::vector<double> edges;
    std::vector<double> values;

    /// Uniform density 1/(hi-lo) on a single cell.
    static GridDensity uniform(double lo, double hi);

    std::size_t cells() const { return values.size(); }
    double lo() const { return edges.front(); }
    double hi() const { return edges.back(); }

    /// Mass of [a, b] (clipped to the grid), exact for the piecewise-constant density.
    double mass(double a, double b) const;
    double total_mass() const { return mass(lo(), hi()); }
    /// Density value at x (0 outside the grid).
    double at(double x) const;
    /// Copy restricted to [a, b] and renormalised to unit mass.
    GridDensity restricted(double a, double b) const;
};

} // namespace escape
