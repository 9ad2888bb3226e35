#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>

#include "escape/errors.hpp"

namespace escape {

/// Neumaier-compensated accumulator. Results do not depend on the magnitude
/// ordering of the summands to first order in the rounding error.
class KahanSum {
public:
    void add(double v)
    {
        double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    KahanSum& operator+=(double v)
    {
        add(v);
        return *this;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs)
{
    KahanSum s;
    for (double x : xs)
        s.add(x);
    return s.value();
}

/// SplitMix64 finaliser; used as a counter-based generator keyed by (seed, index).
inline std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t bits = splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL));
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Solves g(x) = target for a strictly monotone g on [lo, hi].
///
/// The bracket is first shrunk by bisection, then polished with at most
/// 30 safeguarded Newton steps (steps leaving the bracket fall back to
/// bisection). Throws NoConvergence if the bracket is not resolved.
template <class G, class DG>
double solve_monotone(G g, DG dg, double target, double lo, double hi, double tol = 1e-15)
{
    double glo = g(lo) - target;
    double ghi = g(hi) - target;
    if (glo == 0.0)
        return lo;
    if (ghi == 0.0)
        return hi;
    if ((glo > 0) == (ghi > 0))
        throw NotInImage("target outside the bracketed image");
    const bool increasing = ghi > glo;

    for (int i = 0; i < 20 && hi - lo > tol; ++i) {
        double mid = 0.5 * (lo + hi);
        double gm = g(mid) - target;
        if (gm == 0.0)
            return mid;
        if ((gm < 0) == increasing)
            lo = mid;
        else
            hi = mid;
    }

    constexpr double eps = std::numeric_limits<double>::epsilon();
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 30; ++i) {
        if (hi - lo <= tol)
            return 0.5 * (lo + hi);
        double gx = g(x) - target;
        if (gx == 0.0)
            return x;
        if ((gx < 0) == increasing)
            lo = x;
        else
            hi = x;
        double d = dg(x);
        double next = (d != 0.0) ? x - gx / d : 0.5 * (lo + hi);
        if (next == lo || next == hi)
            return next;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= std::max(0.25 * tol, 8.0 * eps * std::abs(x)))
            return next;
        x = next;
    }
    throw NoConvergence("monotone root finder", hi - lo);
}

} // namespace escape
