#pragma once

#include <optional>
#include <string>
#include <vector>

#include "escape/errors.hpp"

namespace escape {

/// Closed/open interval on the real line. Endpoint ownership follows the
/// map definition: a partition point belongs to exactly one branch.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = false;

    bool contains(double x) const
    {
        return (x > lo || (lo_closed && x == lo)) && (x < hi || (hi_closed && x == hi));
    }
    bool contains_closure(double x) const { return x >= lo && x <= hi; }
    double length() const { return hi - lo; }
};

enum class Family { Lsv, Farey, Intermittent, Doubling };

std::string to_string(Family f);

enum class BranchKind {
    Affine,            // slope * (x - anchor) + offset
    LsvLeft,           // x + 2^a x^(1+a)
    FareyTail,         // all Farey levels beyond the explicit truncation
    IntermittentMinus, // x + (x+1)^(1+l1)
    IntermittentPlus,  // -1 + 2 x^k2
};

/// One monotone analytic piece of a map.
struct Branch {
    Interval domain;
    BranchKind kind = BranchKind::Affine;
    bool increasing = true;
    // Affine pieces: slope * (x - anchor) + offset
    double slope = 1.0;
    double anchor = 0.0;
    double offset = 0.0;
};

/// Family parameters as read from a map config block.
struct MapSpec {
    Family family = Family::Lsv;
    double alpha = 0.5; // LSV
    double theta = 2.0; // Farey
    int levels = 2000;  // Farey truncation M
    double l1 = 0.4;    // intermittent
    double k2 = 2.0;    // intermittent
};

struct PeriodicOrbit {
    double point;
    double multiplier; // prod |Df| along the orbit
    int period;
};

/// Interval map given by finitely many explicit monotone branches.
///
/// Branch labels identify analytic pieces. For LSV, intermittent and doubling
/// maps the label is the branch index (0 = left piece). For Farey maps the
/// label of level n is n-1; levels beyond the explicit truncation share one
/// FareyTail branch but keep their own labels, so itineraries stay exact.
///
/// Immutable after construction; every member function is const and
/// thread-safe.
class PiecewiseMap {
public:
    static PiecewiseMap lsv(double alpha);
    static PiecewiseMap farey(double theta, int levels);
    static PiecewiseMap intermittent(double l1, double k2);
    static PiecewiseMap doubling();
    static PiecewiseMap from_spec(const MapSpec& spec);

    const MapSpec& spec() const { return spec_; }
    Family family() const { return spec_.family; }
    const Interval& phase() const { return phase_; }
    const std::vector<Branch>& branches() const { return branches_; }

    /// Index into branches() of the branch owning x. Throws OutOfPhase.
    int branch_index(double x) const;
    /// Analytic-piece label of x (see class comment).
    int label_of(double x) const;
    /// Domain of the piece with the given label.
    Interval label_domain(int label) const;
    bool label_increasing(int label) const;

    double eval(double x) const;
    double eval_abs_derivative(double x) const;

    /// Value of the piece `label` at x, extended continuously to the closure
    /// of its domain. No ownership checks.
    double value_on(int label, double x) const;
    double abs_derivative_on(int label, double x) const;

    /// Unique x in the domain of `label` with f(x) = y, to 1e-13 absolute.
    /// Throws NotInImage.
    double branch_inverse(int label, double y) const;

    /// Evaluation and inversion by index into branches(); used for
    /// interval images. Values extend continuously to domain closures.
    double branch_value(int index, double x) const;
    double branch_inverse_at(int index, double y) const;
    Interval branch_image(int index) const;

    /// Distance from x to the nearest endpoint of the piece owning x.
    double boundary_clearance(double x) const;

    /// LSV only: a_1 = 1/2, a_{j+1} = f_L^{-1}(a_j).
    std::vector<double> left_preimage_sequence(int m) const;

    /// Farey only: t_n = n^{-theta}.
    double farey_level(int n) const;

    /// Periodic orbit following the branch-label word, located by bisection
    /// on f^p_word(x) - x over the cylinder of the word. Throws NotFound.
    PeriodicOrbit find_periodic_point(const std::vector<int>& word) const;

    /// Neutral fixed points (|Df| = 1).
    std::vector<double> indifferent_points() const;
    /// True when Lebesgue measure is invariant (doubling).
    bool lebesgue_invariant() const;
    /// Tail exponent k + beta of the first-return time, when known in closed form.
    std::optional<double> tail_exponent() const;

private:
    PiecewiseMap() = default;
    int farey_label_of(double x) const;
    double farey_t(double n) const;
    double farey_a(double n) const;
    double farey_level_value(double n, double x) const;
    double farey_level_inverse(double n, double y) const;
    double lsv_left(double x) const;
    double lsv_left_deriv(double x) const;

    MapSpec spec_;
    Interval phase_;
    std::vector<Branch> branches_;
    std::vector<int> search_order_; // branch indices sorted by domain.lo
    double lsv_c_ = 0.0;            // 2^alpha
    std::vector<double> farey_t_;   // t_n for n = 0..M+2 (index 0 unused)
    std::vector<double> farey_a_;   // a_n for n = 0..M+1
};

/// Label constants for the two-branch families.
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
/// Label of Farey level n (n >= 1).
inline constexpr int farey_label(int level) { return level - 1; }

} // namespace escape
