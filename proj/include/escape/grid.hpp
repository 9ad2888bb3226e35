#pragma once

#include <vector>

namespace escape {

/// Cell-size grading for Ulam and scan grids.
///
/// Cells shrink geometrically (factor `ratio` per cell) toward each focus
/// point down to `min_cell`, and are uniform elsewhere. Aligned points are
/// forced to be cell edges.
struct GradingSpec {
    double ratio = 1.05;
    double min_cell = 1e-9;
    std::vector<double> focus;
    std::vector<double> aligned;
};

/// Edges lo = e_0 < e_1 < ... < e_n = hi with n close to `cells`
/// (exact unless aligned points force insertions).
std::vector<double> graded_edges(double lo, double hi, int cells, const GradingSpec& spec = {});

std::vector<double> uniform_edges(double lo, double hi, int cells);

} // namespace escape
