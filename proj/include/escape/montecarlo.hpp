#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "escape/escape_curve.hpp"
#include "escape/holes.hpp"
#include "escape/maps.hpp"

namespace escape {

/// Iterates closer than this to an interior partition point are moved by one ulp.
inline constexpr double kBoundaryNudge = 1e-14;

struct SrbSample {
    std::vector<double> points;
    std::int64_t perturbed = 0; // boundary nudges during burn-in
};

/// Independent uniform starts (stream i seeded by (seed, i)), each pushed
/// through burn_in iterates. Maps whose invariant density is known in closed
/// form are sampled from it directly and skip the burn-in: uniform for the
/// doubling map, t_n / a_n on Farey level n.
SrbSample sample_srb_points(const PiecewiseMap& map, std::int64_t count, std::int64_t burn_in,
                            std::uint64_t seed);

/// True when sample_srb_points draws exactly from the invariant measure.
bool has_exact_sampler(const PiecewiseMap& map);

/// One orbit from a uniform start: burn_in iterates, then every `stride`-th iterate.
SrbSample sample_birkhoff_points(const PiecewiseMap& map, std::int64_t count,
                                 std::int64_t burn_in, std::uint64_t seed, int stride = 1);

/// One step of f with the boundary nudge applied first.
double mc_step(const PiecewiseMap& map, double x, std::int64_t& perturbed);

/// survivors[n] = number of starts with tau_H > n, n = 0..N.
struct HitCounts {
    std::int64_t samples = 0;
    std::vector<std::int64_t> survivors;
    std::int64_t perturbed = 0;
};

inline constexpr int kMaxMcHorizon = 1000000;

/// First hitting times of every hole on the same starts, counted up to N.
std::vector<HitCounts> hit_counts(const PiecewiseMap& map, std::span<const Hole> holes,
                                  std::span<const double> points, int N);

EscapeCurve to_curve(const HitCounts& counts, std::uint64_t seed);

/// Escape curves of several holes on shared starts.
std::vector<EscapeCurve> escape_curve_mc(const PiecewiseMap& map, std::span<const Hole> holes,
                                         std::span<const double> points, int N,
                                         std::uint64_t seed = 0);
EscapeCurve escape_curve_mc(const PiecewiseMap& map, const Hole& hole,
                            std::span<const double> points, int N, std::uint64_t seed = 0);

struct WindowEstimate {
    double probability = 0.0;
    double std_error = 0.0;
    std::int64_t hits = 0;
    std::int64_t samples = 0;
};

/// Fraction of starts with n1 <= tau_H <= n2.
WindowEstimate hitting_window_mc(const PiecewiseMap& map, const Hole& hole,
                                 std::span<const double> points, int n1, int n2);
/// Same from counts already taken (n2 within their horizon).
WindowEstimate hitting_window(const HitCounts& counts, int n1, int n2);

} // namespace escape
