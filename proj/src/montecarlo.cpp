#include "escape/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "escape/errors.hpp"
#include "escape/induced.hpp"
#include "escape/numeric.hpp"

namespace escape {

double mc_step(const PiecewiseMap& map, double x, std::int64_t& perturbed)
{
    int label = map.label_of(x);
    const Interval d = map.label_domain(label);
    const Interval& ph = map.phase();
    double edge = std::nan("");
    if (d.lo > ph.lo && x - d.lo < kBoundaryNudge)
        edge = d.lo;
    else if (d.hi < ph.hi && d.hi - x < kBoundaryNudge)
        edge = d.hi;
    if (!std::isnan(edge)) {
        x = x >= edge ? std::nextafter(x, ph.hi) : std::nextafter(x, ph.lo);
        ++perturbed;
        label = map.label_of(x);
    }
    return map.value_on(label, x);
}

namespace {

// Inverse-CDF sampler for the Farey invariant measure: level n = [t_{n+1}, t_n)
// carries mass t_n with constant density on it.
class FareySampler {
public:
    explicit FareySampler(double theta) : theta_(theta), cum_(kLevels + 1, 0.0)
    {
        KahanSum s;
        for (int n = 1; n <= kLevels; ++n) {
            s.add(t(n));
            cum_[n] = s.value();
        }
        s.add(PowerLawTail{1.0, theta, 0.0}.sum_beyond(kLevels));
        total_ = s.value();
    }

    double operator()(double u, double v) const
    {
        const double target = u * total_;
        double n;
        if (target <= cum_[kLevels]) {
            n = static_cast<double>(std::lower_bound(cum_.begin() + 1, cum_.end(), target) -
                                    cum_.begin());
        } else {
            // continuous inversion of the tail sum beyond the table
            const double r = (target - cum_[kLevels]) * (theta_ - 1.0);
            const double head = std::pow(static_cast<double>(kLevels), 1.0 - theta_);
            n = std::floor(std::pow(std::max(head - r, 1e-300), 1.0 / (1.0 - theta_)));
            n = std::max(n, kLevels + 1.0);
        }
        const double lo = t(n + 1.0), hi = t(n);
        return std::min(lo + v * (hi - lo), std::nextafter(hi, 0.0));
    }

private:
    static constexpr int kLevels = 1 << 20;
    double t(double n) const { return std::pow(n, -theta_); }
    double theta_;
    std::vector<double> cum_;
    double total_ = 0.0;
};

} // namespace

bool has_exact_sampler(const PiecewiseMap& map)
{
    return map.lebesgue_invariant() || map.family() == Family::Farey;
}

SrbSample sample_srb_points(const PiecewiseMap& map, std::int64_t count, std::int64_t burn_in,
                            std::uint64_t seed)
{
    SrbSample out;
    if (count <= 0)
        return out;
    if (burn_in < 0)
        throw InvalidParameter("burn-in must be non-negative");
    const Interval& ph = map.phase();
    out.points.resize(count);

    if (map.family() == Family::Farey) {
        const FareySampler draw(map.spec().theta);
        const std::uint64_t seed2 = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i) {
            const auto k = static_cast<std::uint64_t>(i);
            out.points[i] = draw(counter_uniform(seed, k), counter_uniform(seed2, k));
        }
        return out;
    }

    const std::int64_t steps = map.lebesgue_invariant() ? 0 : burn_in;
    std::int64_t perturbed = 0;
#pragma omp parallel for schedule(static) reduction(+ : perturbed)
    for (std::int64_t i = 0; i < count; ++i) {
        double x = ph.lo + ph.length() * counter_uniform(seed, static_cast<std::uint64_t>(i));
        for (std::int64_t s = 0; s < steps; ++s)
            x = mc_step(map, x, perturbed);
        out.points[i] = x;
    }
    out.perturbed = perturbed;
    return out;
}

SrbSample sample_birkhoff_points(const PiecewiseMap& map, std::int64_t count,
                                 std::int64_t burn_in, std::uint64_t seed, int stride)
{
    SrbSample out;
    if (count <= 0)
        return out;
    if (stride < 1 || burn_in < 0)
        throw InvalidParameter("Birkhoff sampling needs stride >= 1 and burn-in >= 0");
    const Interval& ph = map.phase();
    double x = ph.lo + ph.length() * counter_uniform(seed, 0);
    for (std::int64_t s = 0; s < burn_in; ++s)
        x = mc_step(map, x, out.perturbed);
    out.points.reserve(count);
    for (std::int64_t i = 0; i < count; ++i) {
        for (int s = 0; s < stride; ++s)
            x = mc_step(map, x, out.perturbed);
        out.points.push_back(x);
    }
    return out;
}

std::vector<HitCounts> hit_counts(const PiecewiseMap& map, std::span<const Hole> holes,
                                  std::span<const double> points, int N)
{
    if (N < 0 || N > kMaxMcHorizon)
        throw InvalidParameter("Monte Carlo horizon must lie in [0, 1e6]");
    const int H = static_cast<int>(holes.size());
    const std::int64_t S = static_cast<std::int64_t>(points.size());
    // hits[h * (N + 1) + n] = number of starts with tau = n
    std::vector<std::int64_t> hits(static_cast<std::size_t>(H) * (N + 1), 0);
    std::int64_t perturbed = 0;

#pragma omp parallel reduction(+ : perturbed)
    {
        std::vector<std::int64_t> local(hits.size(), 0);
        std::vector<char> done(H);
#pragma omp for schedule(dynamic, 4096)
        for (std::int64_t i = 0; i < S; ++i) {
            double x = points[i];
            int open = 0;
            for (int h = 0; h < H; ++h) {
                done[h] = holes[h].none;
                open += !done[h];
            }
            for (int n = 1; n <= N && open > 0; ++n) {
                x = mc_step(map, x, perturbed);
                for (int h = 0; h < H; ++h)
                    if (!done[h] && holes[h].contains(x)) {
                        done[h] = 1;
                        --open;
                        ++local[static_cast<std::size_t>(h) * (N + 1) + n];
                    }
            }
        }
#pragma omp critical
        for (std::size_t k = 0; k < hits.size(); ++k)
            hits[k] += local[k];
    }

    std::vector<HitCounts> out(H);
    for (int h = 0; h < H; ++h) {
        HitCounts& c = out[h];
        c.samples = S;
        c.perturbed = perturbed;
        c.survivors.resize(static_cast<std::size_t>(N) + 1);
        c.survivors[0] = S;
        for (int n = 1; n <= N; ++n)
            c.survivors[n] = c.survivors[n - 1] - hits[static_cast<std::size_t>(h) * (N + 1) + n];
    }
    return out;
}

EscapeCurve to_curve(const HitCounts& counts, std::uint64_t seed)
{
    EscapeCurve c;
    c.source = CurveSource::MonteCarlo;
    c.samples = counts.samples;
    c.seed = seed;
    const std::size_t M = counts.survivors.size();
    c.survival.resize(M);
    c.std_error.resize(M);
    const double S = static_cast<double>(counts.samples);
    for (std::size_t n = 0; n < M; ++n) {
        const double p = counts.samples > 0 ? counts.survivors[n] / S : 1.0;
        c.survival[n] = p;
        c.std_error[n] = counts.samples > 0 ? std::sqrt(p * (1.0 - p) / S) : 0.0;
    }
    return c;
}

std::vector<EscapeCurve> escape_curve_mc(const PiecewiseMap& map, std::span<const Hole> holes,
                                         std::span<const double> points, int N,
                                         std::uint64_t seed)
{
    std::vector<EscapeCurve> out;
    for (const auto& c : hit_counts(map, holes, points, N))
        out.push_back(to_curve(c, seed));
    return out;
}

EscapeCurve escape_curve_mc(const PiecewiseMap& map, const Hole& hole,
                            std::span<const double> points, int N, std::uint64_t seed)
{
    return escape_curve_mc(map, std::span<const Hole>(&hole, 1), points, N, seed).front();
}

WindowEstimate hitting_window(const HitCounts& counts, int n1, int n2)
{
    WindowEstimate w;
    w.samples = counts.samples;
    if (n1 > n2 || counts.samples == 0)
        return w;
    const int N = static_cast<int>(counts.survivors.size()) - 1;
    if (n1 < 1 || n2 > N)
        throw InvalidParameter("hitting window must lie within [1, horizon]");
    w.hits = counts.survivors[n1 - 1] - counts.survivors[n2];
    const double S = static_cast<double>(counts.samples);
    w.probability = w.hits / S;
    w.std_error = std::sqrt(w.probability * (1.0 - w.probability) / S);
    return w;
}

WindowEstimate hitting_window_mc(const PiecewiseMap& map, const Hole& hole,
                                 std::span<const double> points, int n1, int n2)
{
    if (n1 > n2) {
        WindowEstimate w;
        w.samples = static_cast<std::int64_t>(points.size());
        return w;
    }
    const auto counts = hit_counts(map, std::span<const Hole>(&hole, 1), points, n2);
    return hitting_window(counts.front(), n1, n2);
}

} // namespace escape
