#include "escape/holes.hpp"

#include <cmath>

namespace escape {

Hole Hole::empty()
{
    Hole h;
    h.none = true;
    return h;
}

Hole make_hole(const InducedSystem& sys, double center, double half_width,
               const GridDensity& mu_x)
{
    if (!(half_width > 0.0))
        throw InvalidParameter("hole half-width must be positive");
    Hole h;
    h.center = center;
    h.half_width = half_width;
    h.leb = 2.0 * half_width;
    h.mu = mu_x.mass(h.lo(), h.hi());
    if (sys.in_base(h.lo()) && sys.in_base(h.hi())) {
        try {
            const int s = sys.separation_time(h.lo(), h.hi(), 64);
            h.diam_theta = std::pow(sys.theta(), s);
        } catch (const Saturated&) {
            h.diam_theta = 1.0;
        }
    } else {
        h.diam_theta = 1.0;
    }
    return h;
}

Hole hole_with_measure(const InducedSystem& sys, double center, double target,
                       const GridDensity& mu_x)
{
    if (!(target > 0.0 && target < 1.0))
        throw InvalidParameter("target hole measure must lie in (0,1)");
    double lo = 0.0;
    double hi = std::min(center - sys.base().lo, sys.base().hi - center);
    if (!(hi > 0.0))
        throw InvalidParameter("hole centre must lie inside the base");
    if (mu_x.mass(center - hi, center + hi) < target)
        throw InvalidParameter("base too small for the requested hole measure");
    for (int i = 0; i < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(center)); ++i) {
        double mid = 0.5 * (lo + hi);
        if (mu_x.mass(center - mid, center + mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return make_hole(sys, center, 0.5 * (lo + hi), mu_x);
}

std::optional<Periodicity> detect_periodicity(const PiecewiseMap& map, double z0, int p_max,
                                              double tol)
{
    double y = z0, mult = 1.0;
    for (int p = 1; p <= p_max; ++p) {
        const int label = map.label_of(y);
        mult *= map.abs_derivative_on(label, y);
        y = map.value_on(label, y);
        if (std::abs(y - z0) < tol)
            return Periodicity{p, mult};
    }
    return std::nullopt;
}

double compute_c_H(const HoleReport& report)
{
    if (!report.periodicity)
        return 1.0;
    const double m = report.periodicity->multiplier;
    if (!(m > 1.0 + 1e-12))
        throw DegenerateMultiplier("periodic orbit multiplier " + std::to_string(m) +
                                   " does not exceed 1");
    return 1.0 - 1.0 / m;
}

HoleReport check_admissible(const InducedSystem& sys, const Hole& hole,
                            const AdmissibilityOptions& opts)
{
    HoleReport r;
    if (hole.none) {
        r.failures.push_back("empty hole");
        return r;
    }
    const PiecewiseMap& map = sys.map();

    r.inside_base = sys.in_base(hole.lo()) && sys.in_base(hole.hi());
    if (!r.inside_base)
        r.failures.push_back("hole is not contained in the base");

    double y = hole.center;
    r.singular_clearance = -1;
    for (int i = 0; i <= opts.depth; ++i) {
        if (!map.phase().contains_closure(y) || map.boundary_clearance(y) < opts.clearance_tol)
            break;
        r.singular_clearance = i;
        if (i < opts.depth)
            y = map.eval(y);
    }
    if (r.singular_clearance < opts.depth)
        r.failures.push_back("orbit of the centre comes within " +
                             nlohmann::json(opts.clearance_tol).dump() +
                             " of a partition point by step " +
                             std::to_string(r.singular_clearance + 1));

    if (r.inside_base) {
        try {
            r.cylinder_ok = sys.cylinder_contains(opts.depth, hole.lo(), hole.hi());
            if (!r.cylinder_ok)
                r.failures.push_back("hole is cut by the refined first-return partition");
        } catch (const Saturated& e) {
            r.failures.push_back(std::string("cylinder check: ") + e.what());
        }
    }

    r.measure_ok = hole.mu > 0.0 && hole.mu < opts.sigma;
    if (!r.measure_ok)
        r.failures.push_back("mu_X(H) = " + nlohmann::json(hole.mu).dump() + " outside (0, " +
                             nlohmann::json(opts.sigma).dump() + ")");

    r.aperiodic_returns = sys.aperiodic_on_sample();

    if (r.singular_clearance >= 0)
        r.periodicity = detect_periodicity(map, hole.center, opts.p_max, opts.periodic_tol);
    bool c_ok = true;
    try {
        r.c_H = compute_c_H(r);
    } catch (const DegenerateMultiplier& e) {
        r.c_H = std::nan("");
        c_ok = false;
        r.failures.push_back(e.what());
    }

    r.admissible = r.inside_base && r.singular_clearance >= opts.depth && r.cylinder_ok &&
                   r.measure_ok && c_ok;
    return r;
}

nlohmann::json to_json(const Hole& hole)
{
    if (hole.none)
        return {{"empty", true}};
    return {{"center", hole.center},         {"half_width", hole.half_width},
            {"lo", hole.lo()},               {"hi", hole.hi()},
            {"leb_measure", hole.leb},       {"mu_measure", hole.mu},
            {"diam_theta", hole.diam_theta}};
}

nlohmann::json to_json(const HoleReport& r)
{
    nlohmann::json j = {{"admissible", r.admissible},
                        {"inside_base", r.inside_base},
                        {"singular_clearance", r.singular_clearance},
                        {"cylinder_ok", r.cylinder_ok},
                        {"measure_ok", r.measure_ok},
                        {"aperiodic_returns_observed", r.aperiodic_returns},
                        {"c_H", std::isnan(r.c_H) ? nlohmann::json(nullptr) : nlohmann::json(r.c_H)},
                        {"failures", r.failures}};
    if (r.periodicity)
        j["periodicity"] = {{"period", r.periodicity->period},
                            {"multiplier", r.periodicity->multiplier}};
    else
        j["periodicity"] = nullptr;
    return j;
}

} // namespace escape
