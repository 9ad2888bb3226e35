#include "escape/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace escape {

namespace {

std::vector<double> march(double lo, double hi, double uniform, const GradingSpec& spec,
                          const std::vector<double>& focus, std::size_t limit)
{
    const double r = spec.ratio;
    const double hmin = std::min(spec.min_cell, uniform);
    std::vector<double> edges{lo};
    double x = lo;
    while (x < hi) {
        if (edges.size() > limit)
            break;
        auto ahead = std::upper_bound(focus.begin(), focus.end(), x);
        double da = ahead == focus.end() ? std::numeric_limits<double>::infinity() : *ahead - x;
        double db = ahead == focus.begin() ? std::numeric_limits<double>::infinity()
                                           : x - *(ahead - 1);
        double t = uniform;
        if (std::isfinite(da))
            t = std::min(t, (hmin + (r - 1.0) * da) / r);
        if (std::isfinite(db))
            t = std::min(t, hmin + (r - 1.0) * db);
        if (std::isfinite(da) && t >= da * (1.0 - 1e-12))
            t = da;
        double next = x + t;
        if (next >= hi || hi - next < 0.3 * t)
            next = hi;
        edges.push_back(next);
        x = next;
    }
    return edges;
}

} // namespace

std::vector<double> uniform_edges(double lo, double hi, int cells)
{
    if (cells < 1 || !(hi > lo))
        throw std::invalid_argument("uniform grid needs cells >= 1 and hi > lo");
    std::vector<double> e(cells + 1);
    for (int i = 0; i <= cells; ++i)
        e[i] = lo + (hi - lo) * (static_cast<double>(i) / cells);
    e.back() = hi;
    return e;
}

std::vector<double> graded_edges(double lo, double hi, int cells, const GradingSpec& spec)
{
    if (cells < 1 || !(hi > lo))
        throw std::invalid_argument("graded grid needs cells >= 1 and hi > lo");
    if (!(spec.ratio > 1.0))
        throw std::invalid_argument("grading ratio must exceed 1");

    std::vector<double> focus;
    for (double f : spec.focus)
        if (f >= lo && f <= hi)
            focus.push_back(f);
    std::sort(focus.begin(), focus.end());
    focus.erase(std::unique(focus.begin(), focus.end()), focus.end());

    std::vector<double> edges;
    if (focus.empty()) {
        edges = uniform_edges(lo, hi, cells);
    } else {
        // Bisection on the uniform cell size for an exact cell count.
        const std::size_t limit = static_cast<std::size_t>(cells) * 4 + 16;
        double a = (hi - lo) / (4.0 * cells + 16.0), b = (hi - lo);
        edges = march(lo, hi, b, spec, focus, limit);
        for (int it = 0; it < 200; ++it) {
            double mid = std::sqrt(a * b);
            auto e = march(lo, hi, mid, spec, focus, limit);
            int n = static_cast<int>(e.size()) - 1;
            if (n == cells) {
                edges = std::move(e);
                break;
            }
            if (n > cells)
                a = mid;
            else
                b = mid;
            if (std::abs(n - cells) < std::abs(static_cast<int>(edges.size()) - 1 - cells))
                edges = std::move(e);
        }
    }

    // Force aligned points onto edges.
    for (double p : spec.aligned) {
        if (!(p > lo && p < hi))
            continue;
        auto it = std::lower_bound(edges.begin(), edges.end(), p);
        if (*it == p)
            continue;
        edges.insert(it, p);
    }
    return edges;
}

} // namespace escape
