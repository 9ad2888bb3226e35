#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "escape/density.hpp"
#include "escape/maps.hpp"

namespace escape {

/// Identity of a first-return cell: return time plus a hash of the branch
/// labels visited before returning. Two points share a cell iff their
/// CellIds compare equal (up to hash collisions).
struct CellId {
    int R = 0;
    std::uint64_t word = 0;
    bool operator==(const CellId&) const = default;
};

struct ReturnResult {
    enum class Status { Ok, Saturated, HitSingularity };
    Status status = Status::Ok;
    int R = 0;
    double y = 0.0;     // f^R(x)
    double deriv = 1.0; // |DF^R(x)|
    std::uint64_t word = 0;

    bool ok() const { return status == Status::Ok; }
    CellId cell() const { return {ok() ? R : -static_cast<int>(status), word}; }
};

struct FirstReturn {
    int R;
    double y;
    double deriv;
};

/// First-return (induced) system of a map over a base interval X.
///
/// Immutable after construction and safe to share across threads.
class InducedSystem {
public:
    InducedSystem(PiecewiseMap map, Interval base, int cap = 100000);

    const PiecewiseMap& map() const { return map_; }
    const Interval& base() const { return base_; }
    int cap() const { return cap_; }
    /// Contraction constant of the separation metric d(x,y) = theta^s(x,y).
    double theta() const { return theta_; }
    /// Infimum of |DF^R| measured on a sample of the base.
    double min_expansion() const { return min_expansion_; }

    bool in_base(double x) const { return base_.contains(x); }

    /// Non-throwing first return; `cap` <= 0 uses the system cap.
    ReturnResult first_return(double x, int cap = 0) const;
    /// Throws Saturated or HitSingularity.
    FirstReturn first_return_time(double x) const;

    /// Branch labels visited by f, f^2, ..., f^R starting from x (R letters).
    std::vector<int> return_word(double x) const;
    /// Inverse of the induced branch with the given word: the x in that
    /// cell with F^R(x) = y.
    double inverse_along(std::span<const int> word, double y) const;

    /// Number of induced steps before x and y fall into different
    /// first-return cells, capped. Throws Saturated.
    int separation_time(double x, double y, int cap) const;

    /// True iff [u, v] lies in one element of the depth-fold refined
    /// first-return partition. Throws Saturated.
    bool cylinder_contains(int depth, double u, double v) const;

    /// Points of the base closure where the return time diverges
    /// (preimages of indifferent fixed points).
    std::vector<double> accumulation_points() const;

    /// gcd of the return times observed on a sample equals 1.
    bool aperiodic_on_sample(int samples = 4096) const;

private:
    PiecewiseMap map_;
    Interval base_;
    int cap_;
    double theta_ = 0.5;
    double min_expansion_ = 0.0;
};

/// LSV base (a_m, 1], a_m = f_L^{-(m-1)}(1/2).
Interval lsv_base(const PiecewiseMap& map, int m);
/// Farey base [t_m, 1].
Interval farey_base(const PiecewiseMap& map, int m);

enum class IntermittentSide { Minus, Plus, Both };
/// Union of the first n+1 cells Delta_0..Delta_n on the chosen side(s).
Interval intermittent_base(const PiecewiseMap& map, IntermittentSide side, int n);

/// Smallest family base containing [lo, hi], keeping the hole's lower edge
/// at least 10% of its distance to the indifferent point inside the base.
Interval auto_base(const PiecewiseMap& map, double lo, double hi);

// ---------------------------------------------------------------------------

enum class TailSource { AnalyticFarey, GridMeasured, MonteCarlo, Explicit };
std::string to_string(TailSource s);

/// Power-law model v[n] ~ scale * (n + shift)^(-exponent) used beyond the horizon.
struct PowerLawTail {
    double scale = 1.0;
    double exponent = 2.0;
    double shift = 0.0;

    double at(double n) const;
    /// Sum over i > N of at(i), Euler-Maclaurin to O(N^{-exponent-5}).
    double sum_beyond(int N) const;
};

/// v[n] = mu_X(R >= n) for n = 0..N (v[0] = v[1] = 1).
struct TailSequence {
    std::vector<double> geq;
    int k = 1;
    double beta = 0.0;
    TailSource source = TailSource::Explicit;
    double truncation_mass = 0.0; // mu_X(R > N)
    std::optional<PowerLawTail> model;
    Interval base;

    int horizon() const { return static_cast<int>(geq.size()) - 1; }
    /// mu_X(R >= n); beyond the horizon uses the model or 0.
    double at_least(long n) const;
    /// mu_X(R > a) = mu_X(R >= a+1).
    double greater_than(long a) const { return at_least(a + 1); }

    /// Builds a sequence from explicit values v[1..N] (v[0] is prepended).
    static TailSequence from_values(std::vector<double> v_from_1, int k, double beta);
    /// v[n] = n^{-theta}, the level tail of a Farey map over [t_2, 1].
    static TailSequence farey_power(double theta, int N);
};

/// Splits a tail exponent s = k + beta into integer and fractional parts.
std::pair<int, double> split_exponent(double s);

struct TailOptions {
    int scan_cells = 200000;
    bool extrapolate = false;
};

/// mu_X(R >= n), n <= N. Farey level bases use the analytic level tail;
/// otherwise the base is scanned and each first-return cell weighted by
/// `density` (an invariant density of the induced map on the base).
TailSequence tail_measure(const InducedSystem& sys, int N, const GridDensity& density,
                          const TailOptions& opts = {});

/// Empirical tail from sample points (points outside the base are ignored).
TailSequence tail_measure_mc(const InducedSystem& sys, int N, std::span<const double> points);

/// CSV with columns n, mu_geq_n, source; '#' header lines carry k, beta,
/// base and truncation mass.
void write_csv(std::ostream& os, const TailSequence& tail);

/// Least-squares slope of log v[n] against log n over the last decade.
double fit_tail_exponent(const TailSequence& tail);

} // namespace escape
