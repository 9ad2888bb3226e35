#include "escape/induced.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "escape/grid.hpp"
#include "escape/numeric.hpp"

namespace escape {

namespace {

constexpr double kSingularTol = 1e-14;

std::uint64_t mix_word(std::uint64_t h, int label)
{
    return splitmix64(h ^ (static_cast<std::uint64_t>(label) + 0x632be59bd9b4e019ULL));
}

// Distance test against interior partition points only; phase endpoints are
// not singular.
bool near_partition_point(const PiecewiseMap& map, int label, double x)
{
    if (map.family() == Family::Farey && label >= map.spec().levels)
        return false;
    const Interval d = map.label_domain(label);
    const Interval& ph = map.phase();
    if (d.lo != ph.lo && x - d.lo < kSingularTol)
        return true;
    if (d.hi != ph.hi && d.hi - x < kSingularTol)
        return true;
    return false;
}

} // namespace

InducedSystem::InducedSystem(PiecewiseMap map, Interval base, int cap)
    : map_(std::move(map)), base_(base), cap_(cap)
{
    if (!(base_.hi > base_.lo))
        throw InvalidParameter("induced base must have positive length");
    if (!map_.phase().contains_closure(base_.lo) || !map_.phase().contains_closure(base_.hi))
        throw InvalidParameter("induced base must lie inside the phase interval");
    for (double p : map_.indifferent_points())
        if (base_.contains_closure(p))
            throw InvalidParameter("base closure contains the indifferent point " +
                                   std::to_string(p));
    if (cap_ < 1)
        throw InvalidParameter("return-time cap must be positive");

    constexpr int samples = 4096;
    const int probe_cap = std::min(cap_, 20000);
    double lmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        double x = base_.lo + (i + 0.5) / samples * base_.length();
        ReturnResult r = first_return(x, probe_cap);
        if (r.ok())
            lmin = std::min(lmin, r.deriv);
    }
    min_expansion_ = std::isfinite(lmin) ? lmin : 0.0;
    theta_ = lmin > 1.0 ? std::clamp(1.0 / lmin, 0.5, 0.999) : 0.999;
}

ReturnResult InducedSystem::first_return(double x, int cap) const
{
    if (cap <= 0)
        cap = cap_;
    ReturnResult r;
    double y = x;
    for (int n = 1; n <= cap; ++n) {
        const int label = map_.label_of(y);
        if (near_partition_point(map_, label, y)) {
            r.status = ReturnResult::Status::HitSingularity;
            r.R = n - 1;
            r.y = y;
            return r;
        }
        r.deriv *= map_.abs_derivative_on(label, y);
        y = map_.value_on(label, y);
        r.word = mix_word(r.word, label);
        if (base_.contains(y)) {
            r.R = n;
            r.y = y;
            return r;
        }
    }
    r.status = ReturnResult::Status::Saturated;
    r.R = cap;
    r.y = y;
    return r;
}

FirstReturn InducedSystem::first_return_time(double x) const
{
    if (!base_.contains(x))
        throw OutOfPhase("first return requested outside the base");
    ReturnResult r = first_return(x);
    if (r.status == ReturnResult::Status::Saturated)
        throw Saturated(cap_);
    if (r.status == ReturnResult::Status::HitSingularity)
        throw HitSingularity("iterate " + std::to_string(r.R) + " lands on a partition point");
    return {r.R, r.y, r.deriv};
}

std::vector<int> InducedSystem::return_word(double x) const
{
    std::vector<int> word;
    double y = x;
    for (int n = 1; n <= cap_; ++n) {
        const int label = map_.label_of(y);
        word.push_back(label);
        y = map_.value_on(label, y);
        if (base_.contains(y))
            return word;
    }
    throw Saturated(cap_);
}

double InducedSystem::inverse_along(std::span<const int> word, double y) const
{
    double x = y;
    for (auto it = word.rbegin(); it != word.rend(); ++it)
        x = map_.branch_inverse(*it, x);
    return x;
}

int InducedSystem::separation_time(double x, double y, int cap) const
{
    for (int n = 0; n < cap; ++n) {
        if (x == y)
            return cap;
        ReturnResult rx = first_return(x), ry = first_return(y);
        if (rx.status == ReturnResult::Status::Saturated ||
            ry.status == ReturnResult::Status::Saturated)
            throw Saturated(cap_);
        if (!rx.ok() || !ry.ok() || !(rx.cell() == ry.cell()))
            return n;
        x = rx.y;
        y = ry.y;
    }
    return cap;
}

bool InducedSystem::cylinder_contains(int depth, double u, double v) const
{
    if (u > v)
        std::swap(u, v);
    if (!base_.contains(u) || !base_.contains(v))
        return false;
    double pts[3] = {u, 0.5 * (u + v), v};
    for (int i = 0; i <= depth; ++i) {
        ReturnResult r[3];
        for (int j = 0; j < 3; ++j) {
            r[j] = first_return(pts[j]);
            if (r[j].status == ReturnResult::Status::Saturated)
                throw Saturated(cap_);
            if (!r[j].ok())
                return false;
        }
        if (!(r[0].cell() == r[1].cell()) || !(r[1].cell() == r[2].cell()))
            return false;
        for (int j = 0; j < 3; ++j)
            pts[j] = r[j].y;
    }
    return true;
}

std::vector<double> InducedSystem::accumulation_points() const
{
    std::set<double> found;
    std::vector<double> frontier = map_.indifferent_points();
    std::set<double> seen(frontier.begin(), frontier.end());
    const int nb = static_cast<int>(map_.branches().size());
    for (int depth = 0; depth < 4 && !frontier.empty(); ++depth) {
        std::vector<double> next;
        for (double q : frontier) {
            for (int b = 0; b < nb; ++b) {
                if (!map_.branch_image(b).contains_closure(q))
                    continue;
                double x;
                try {
                    x = map_.branch_inverse_at(b, q);
                } catch (const NotInImage&) {
                    continue;
                }
                if (base_.contains_closure(x)) {
                    found.insert(x);
                } else if (seen.insert(x).second) {
                    next.push_back(x);
                }
            }
        }
        frontier = std::move(next);
    }
    return {found.begin(), found.end()};
}

bool InducedSystem::aperiodic_on_sample(int samples) const
{
    int g = 0;
    for (int i = 0; i < samples && g != 1; ++i) {
        double x = base_.lo + (i + 0.5) / samples * base_.length();
        ReturnResult r = first_return(x);
        if (r.ok())
            g = std::gcd(g, r.R);
    }
    return g == 1;
}

// ---------------------------------------------------------------------------
// bases

Interval lsv_base(const PiecewiseMap& map, int m)
{
    const double a = map.left_preimage_sequence(m).back();
    return {a, 1.0, false, true};
}

Interval farey_base(const PiecewiseMap& map, int m)
{
    if (m < 2)
        throw InvalidParameter("Farey base needs m >= 2");
    return {map.farey_level(m), 1.0, true, true};
}

Interval intermittent_base(const PiecewiseMap& map, IntermittentSide side, int n)
{
    if (map.family() != Family::Intermittent)
        throw InvalidParameter("intermittent base requested for another family");
    if (n < 0)
        throw InvalidParameter("intermittent base needs n >= 0");
    double c = map.branch_inverse(kLeft, 0.0);
    double d = map.branch_inverse(kRight, 0.0);
    for (int j = 0; j < n; ++j) {
        c = map.branch_inverse(kLeft, c);
        d = map.branch_inverse(kRight, d);
    }
    switch (side) {
    case IntermittentSide::Minus: return {c, 0.0, false, false};
    case IntermittentSide::Plus: return {0.0, d, false, false};
    case IntermittentSide::Both: return {c, d, false, false};
    }
    return {c, d, false, false};
}

Interval auto_base(const PiecewiseMap& map, double lo, double hi)
{
    constexpr int max_m = 100000;
    switch (map.family()) {
    case Family::Doubling: return map.phase();
    case Family::Lsv: {
        const double target = 0.9 * lo;
        double a = 0.5;
        for (int m = 1; m <= max_m; ++m) {
            if (a <= target && hi <= 1.0)
                return {a, 1.0, false, true};
            a = map.branch_inverse(kLeft, a);
        }
        break;
    }
    case Family::Farey: {
        const double target = 0.9 * lo;
        for (int m = 2; m <= max_m; ++m)
            if (map.farey_level(m) <= target && hi <= 1.0)
                return farey_base(map, m);
        break;
    }
    case Family::Intermittent: {
        const double need_lo = 0.9 * lo + 0.1 * -1.0;
        const double need_hi = 0.9 * hi + 0.1 * 1.0;
        const bool minus = lo < 0.0, plus = hi > 0.0;
        double c = map.branch_inverse(kLeft, 0.0);
        double d = map.branch_inverse(kRight, 0.0);
        for (int n = 0; n <= max_m; ++n) {
            bool ok_minus = !minus || c <= need_lo;
            bool ok_plus = !plus || d >= need_hi;
            if (ok_minus && ok_plus) {
                auto side = minus && plus ? IntermittentSide::Both
                            : minus       ? IntermittentSide::Minus
                                          : IntermittentSide::Plus;
                return intermittent_base(map, side, n);
            }
            c = map.branch_inverse(kLeft, c);
            d = map.branch_inverse(kRight, d);
        }
        break;
    }
    }
    throw InvalidParameter("no family base contains the holes with the required margin");
}

// ---------------------------------------------------------------------------
// tails

std::string to_string(TailSource s)
{
    switch (s) {
    case TailSource::AnalyticFarey: return "analytic-farey";
    case TailSource::GridMeasured: return "grid-measured";
    case TailSource::MonteCarlo: return "monte-carlo";
    case TailSource::Explicit: return "explicit";
    }
    return "unknown";
}

double PowerLawTail::at(double n) const { return scale * std::pow(n + shift, -exponent); }

double PowerLawTail::sum_beyond(int N) const
{
    const double s = exponent;
    const double x = N + shift;
    const double xs = std::pow(x, -s);
    double v = x * xs / (s - 1.0) - 0.5 * xs + s * xs / (12.0 * x) -
               s * (s + 1.0) * (s + 2.0) * xs / (720.0 * x * x * x);
    return scale * v;
}

double TailSequence::at_least(long n) const
{
    if (n <= 1)
        return 1.0;
    if (n <= horizon())
        return geq[static_cast<std::size_t>(n)];
    return model ? model->at(static_cast<double>(n)) : 0.0;
}

std::pair<int, double> split_exponent(double s)
{
    if (!(s > 1.0))
        throw InvalidParameter("tail exponent must exceed 1");
    double k = std::floor(s);
    return {static_cast<int>(k), s - k};
}

TailSequence TailSequence::from_values(std::vector<double> v_from_1, int k, double beta)
{
    TailSequence t;
    t.geq.reserve(v_from_1.size() + 1);
    t.geq.push_back(1.0);
    t.geq.insert(t.geq.end(), v_from_1.begin(), v_from_1.end());
    t.k = k;
    t.beta = beta;
    t.source = TailSource::Explicit;
    t.truncation_mass = t.geq.size() > 1 ? t.geq.back() : 0.0;
    return t;
}

TailSequence TailSequence::farey_power(double theta, int N)
{
    TailSequence t;
    t.geq.resize(static_cast<std::size_t>(N) + 1);
    t.geq[0] = 1.0;
    for (int n = 1; n <= N; ++n)
        t.geq[n] = std::pow(static_cast<double>(n), -theta);
    std::tie(t.k, t.beta) = split_exponent(theta);
    t.source = TailSource::AnalyticFarey;
    t.model = PowerLawTail{1.0, theta, 0.0};
    t.truncation_mass = t.model->at(N + 1.0);
    t.base = {std::pow(2.0, -theta), 1.0, true, true};
    return t;
}

namespace {

void finish_exponents(TailSequence& t, const PiecewiseMap& map, bool extrapolate)
{
    if (auto s = map.tail_exponent())
        std::tie(t.k, t.beta) = split_exponent(*s);
    else if (double fitted = fit_tail_exponent(t); fitted > 1.0)
        std::tie(t.k, t.beta) = split_exponent(fitted);
    if (!extrapolate)
        return;
    const double s = t.k + t.beta;
    const int N = t.horizon();
    KahanSum acc;
    int cnt = 0;
    for (int n = std::max(2, N / 10); n <= N; ++n) {
        if (t.geq[n] <= 0.0)
            continue;
        acc.add(std::log(t.geq[n]) + s * std::log(static_cast<double>(n)));
        ++cnt;
    }
    if (cnt > 0)
        t.model = PowerLawTail{std::exp(acc.value() / cnt), s, 0.0};
}

std::optional<int> farey_level_index(const PiecewiseMap& map, const Interval& base)
{
    if (base.hi != 1.0)
        return std::nullopt;
    const double theta = map.spec().theta;
    const double guess = std::round(std::pow(base.lo, -1.0 / theta));
    if (!(guess >= 2.0 && guess < 1e9))
        return std::nullopt;
    const int m = static_cast<int>(guess);
    if (std::abs(map.farey_level(m) - base.lo) > 1e-14 * base.lo)
        return std::nullopt;
    return m;
}

TailSequence farey_analytic(const InducedSystem& sys, int m, int N)
{
    const PiecewiseMap& map = sys.map();
    const double theta = map.spec().theta;
    // the invariant density is t_j / a_j on level j, so level j carries mass t_j
    // and only level-1 points leave [t_m, 1]
    KahanSum mass;
    for (int j = 1; j < m; ++j)
        mass.add(map.farey_level(j));
    const double scale = 1.0 / mass.value();
    TailSequence t;
    t.geq.resize(static_cast<std::size_t>(N) + 1);
    t.geq[0] = 1.0;
    if (N >= 1)
        t.geq[1] = 1.0;
    for (int n = 2; n <= N; ++n)
        t.geq[n] = m == 2 ? std::pow(static_cast<double>(n), -theta)
                          : scale * std::pow(static_cast<double>(n + m - 2), -theta);
    std::tie(t.k, t.beta) = split_exponent(theta);
    t.source = TailSource::AnalyticFarey;
    t.model = PowerLawTail{scale, theta, static_cast<double>(m - 2)};
    t.truncation_mass = t.model->at(N + 1.0);
    t.base = sys.base();
    return t;
}

constexpr int kLostId = -1;

struct Piece {
    int id;
    double mass;
};

} // namespace

TailSequence tail_measure(const InducedSystem& sys, int N, const GridDensity& density,
                          const TailOptions& opts)
{
    if (N < 1)
        throw InvalidParameter("tail horizon must be at least 1");
    if (N > sys.cap())
        throw InvalidParameter("tail horizon exceeds the return-time cap");
    const PiecewiseMap& map = sys.map();
    const Interval& base = sys.base();
    if (map.family() == Family::Farey)
        if (auto m = farey_level_index(map, base))
            return farey_analytic(sys, *m, N);

    GradingSpec grading;
    grading.min_cell = 1e-12;
    grading.focus = sys.accumulation_points();
    grading.focus.push_back(base.lo);
    grading.focus.push_back(base.hi);
    const std::vector<double> edges = graded_edges(base.lo, base.hi, opts.scan_cells, grading);
    const int cells = static_cast<int>(edges.size()) - 1;

    auto id_of = [&](double x) {
        ReturnResult r = sys.first_return(x, N);
        switch (r.status) {
        case ReturnResult::Status::Ok: return r.R;
        case ReturnResult::Status::Saturated: return N + 1;
        case ReturnResult::Status::HitSingularity: return kLostId;
        }
        return kLostId;
    };

    // Edge points that the base does not own are probed just inside.
    std::vector<int> edge_id(edges.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (int i = 0; i <= cells; ++i) {
        double x = edges[i];
        if (!base.contains(x))
            x = i == 0 ? std::nextafter(x, base.hi) : std::nextafter(x, base.lo);
        edge_id[i] = id_of(x);
    }

    std::vector<std::vector<Piece>> pieces(cells);
#pragma omp parallel for schedule(dynamic, 256)
    for (int i = 0; i < cells; ++i) {
        std::vector<Piece>& out = pieces[i];
        auto resolve = [&](auto&& self, double u, int iu, double v, int iv, int depth) -> void {
            if (iu == iv) {
                out.push_back({iu, density.mass(u, v)});
                return;
            }
            const double mid = 0.5 * (u + v);
            if (depth > 64 || mid <= u || mid >= v) {
                out.push_back({iu != kLostId ? iu : iv, density.mass(u, v)});
                return;
            }
            const int im = id_of(mid);
            self(self, u, iu, mid, im, depth + 1);
            self(self, mid, im, v, iv, depth + 1);
        };
        resolve(resolve, edges[i], edge_id[i], edges[i + 1], edge_id[i + 1], 0);
    }

    std::vector<KahanSum> bins(static_cast<std::size_t>(N) + 2);
    KahanSum lost;
    for (const auto& cell : pieces)
        for (const Piece& p : cell) {
            if (p.id == kLostId)
                lost.add(p.mass);
            else
                bins[p.id].add(p.mass);
        }

    KahanSum total;
    for (const auto& b : bins)
        total.add(b.value());
    const double norm = total.value();
    if (!(norm > 0.0))
        throw InvalidParameter("density carries no mass on the base");

    TailSequence t;
    t.geq.assign(static_cast<std::size_t>(N) + 1, 0.0);
    KahanSum suffix;
    suffix.add(bins[N + 1].value());
    t.truncation_mass = bins[N + 1].value() / norm;
    for (int n = N; n >= 2; --n) {
        suffix.add(bins[n].value());
        t.geq[n] = std::min(1.0, suffix.value() / norm);
    }
    t.geq[0] = 1.0;
    t.geq[1] = 1.0;
    for (int n = 2; n <= N; ++n)
        t.geq[n] = std::min(t.geq[n], t.geq[n - 1]);
    t.source = TailSource::GridMeasured;
    t.base = base;
    finish_exponents(t, map, opts.extrapolate);
    return t;
}

TailSequence tail_measure_mc(const InducedSystem& sys, int N, std::span<const double> points)
{
    if (N < 1)
        throw InvalidParameter("tail horizon must be at least 1");
    std::vector<long long> counts(static_cast<std::size_t>(N) + 2, 0);
    long long used = 0;
    for (double x : points) {
        if (!sys.in_base(x))
            continue;
        ReturnResult r = sys.first_return(x, N);
        if (r.status == ReturnResult::Status::HitSingularity)
            continue;
        ++used;
        ++counts[r.ok() ? r.R : N + 1];
    }
    TailSequence t;
    t.geq.assign(static_cast<std::size_t>(N) + 1, 0.0);
    t.geq[0] = 1.0;
    if (used > 0) {
        long long suffix = counts[N + 1];
        t.truncation_mass = static_cast<double>(suffix) / used;
        for (int n = N; n >= 1; --n) {
            suffix += counts[n];
            t.geq[n] = static_cast<double>(suffix) / used;
        }
    }
    t.geq[1] = 1.0;
    t.source = TailSource::MonteCarlo;
    t.base = sys.base();
    finish_exponents(t, sys.map(), false);
    return t;
}

double fit_tail_exponent(const TailSequence& tail)
{
    const int N = tail.horizon();
    std::vector<double> lx, ly;
    for (int n = std::max(2, N / 10); n <= N; ++n) {
        if (tail.geq[n] <= 0.0)
            continue;
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(tail.geq[n]));
    }
    if (lx.size() < 2)
        return 0.0;
    const double mx = compensated_sum(lx) / lx.size();
    const double my = compensated_sum(ly) / ly.size();
    KahanSum sxy, sxx;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy.add((lx[i] - mx) * (ly[i] - my));
        sxx.add((lx[i] - mx) * (lx[i] - mx));
    }
    if (sxx.value() <= 0.0)
        return 0.0;
    return -sxy.value() / sxx.value();
}

void write_csv(std::ostream& os, const TailSequence& tail)
{
    os.precision(17);
    os << "# k=" << tail.k << "\n";
    os << "# beta=" << tail.beta << "\n";
    os << "# base=" << (tail.base.lo_closed ? "[" : "(") << tail.base.lo << ","
       << tail.base.hi << (tail.base.hi_closed ? "]" : ")") << "\n";
    os << "# truncation_mass=" << tail.truncation_mass << "\n";
    os << "n,mu_geq_n,source\n";
    const std::string src = to_string(tail.source);
    for (int n = 1; n <= tail.horizon(); ++n)
        os << n << "," << tail.geq[n] << "," << src << "\n";
}

} // namespace escape
