#include "escape/density.hpp"

#include <algorithm>
#include <stdexcept>

#include "escape/numeric.hpp"

namespace escape {

GridDensity GridDensity::uniform(double lo, double hi)
{
    return {{lo, hi}, {1.0 / (hi - lo)}};
}

double GridDensity::mass(double a, double b) const
{
    a = std::max(a, lo());
    b = std::min(b, hi());
    if (!(b > a))
        return 0.0;
    auto first = std::upper_bound(edges.begin(), edges.end(), a) - edges.begin() - 1;
    KahanSum s;
    for (auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(first, 0)); i < values.size(); ++i) {
        double u = std::max(a, edges[i]);
        double v = std::min(b, edges[i + 1]);
        if (u >= b)
            break;
        if (v > u)
            s.add(values[i] * (v - u));
    }
    return s.value();
}

double GridDensity::at(double x) const
{
    if (x < lo() || x > hi())
        return 0.0;
    auto i = std::upper_bound(edges.begin(), edges.end(), x) - edges.begin() - 1;
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(values.size()) - 1);
    return values[static_cast<std::size_t>(i)];
}

GridDensity GridDensity::restricted(double a, double b) const
{
    const double m = mass(a, b);
    if (!(m > 0.0))
        throw std::invalid_argument("density has no mass on the requested interval");
    GridDensity out;
    out.edges.push_back(a);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double u = std::max(a, edges[i]);
        double v = std::min(b, edges[i + 1]);
        if (v <= u)
            continue;
        if (u > out.edges.back())
            out.edges.push_back(u), out.values.push_back(0.0);
        out.edges.push_back(v);
        out.values.push_back(values[i] / m);
    }
    return out;
}

} // namespace escape
