#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "escape/density.hpp"
#include "escape/induced.hpp"

namespace escape {

/// Interval hole H = [center - half_width, center + half_width].
/// A hole with half_width 0 and `none` set is the empty hole.
struct Hole {
    double center = 0.0;
    double half_width = 0.0;
    double leb = 0.0;
    double mu = 0.0;         // mu_X(H)
    double diam_theta = 0.0; // theta^s(lo, hi)
    bool none = false;

    static Hole empty();

    double lo() const { return center - half_width; }
    double hi() const { return center + half_width; }
    bool contains(double x) const { return !none && x >= lo() && x <= hi(); }
};

/// Builds a hole and fills its Lebesgue and mu_X measures and d_theta diameter.
/// `mu_x` is the invariant density of the induced map, normalised on the base.
Hole make_hole(const InducedSystem& sys, double center, double half_width,
               const GridDensity& mu_x);

/// Hole about `center` whose mu_X measure equals `target` (bisection on the width).
Hole hole_with_measure(const InducedSystem& sys, double center, double target,
                       const GridDensity& mu_x);

struct Periodicity {
    int period = 0;
    double multiplier = 1.0;
};

struct HoleReport {
    bool admissible = false;
    bool inside_base = false;
    int singular_clearance = 0;
    bool cylinder_ok = false;
    bool measure_ok = false;
    bool aperiodic_returns = false;
    std::optional<Periodicity> periodicity;
    double c_H = 1.0;
    std::vector<std::string> failures;
};

/// Smallest p <= p_max with |f^p(z0) - z0| < tol, with the orbit multiplier.
std::optional<Periodicity> detect_periodicity(const PiecewiseMap& map, double z0, int p_max = 16,
                                              double tol = 1e-9);

/// 1 for non-periodic centres, 1 - 1/multiplier for periodic ones.
/// Throws DegenerateMultiplier when the multiplier does not exceed 1.
double compute_c_H(const HoleReport& report);

struct AdmissibilityOptions {
    int depth = 2;
    double sigma = 0.05;
    double clearance_tol = 1e-10;
    int p_max = 16;
    double periodic_tol = 1e-9;
};

HoleReport check_admissible(const InducedSystem& sys, const Hole& hole,
                            const AdmissibilityOptions& opts = {});

nlohmann::json to_json(const Hole& hole);
nlohmann::json to_json(const HoleReport& report);

} // namespace escape
