#include "escape/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "escape/numeric.hpp"

namespace escape {

namespace {

constexpr int kFareyMaxLabel = 1 << 30;

Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
Interval half_open(double lo, double hi) { return {lo, hi, true, false}; }
Interval open_closed(double lo, double hi) { return {lo, hi, false, true}; }

Branch affine(Interval dom, double slope, double anchor, double offset)
{
    Branch b;
    b.domain = dom;
    b.kind = BranchKind::Affine;
    b.increasing = slope > 0;
    b.slope = slope;
    b.anchor = anchor;
    b.offset = offset;
    return b;
}

Branch analytic(Interval dom, BranchKind kind)
{
    Branch b;
    b.domain = dom;
    b.kind = kind;
    b.increasing = true;
    return b;
}

} // namespace

std::string to_string(Family f)
{
    switch (f) {
    case Family::Lsv: return "lsv";
    case Family::Farey: return "farey";
    case Family::Intermittent: return "intermittent";
    case Family::Doubling: return "doubling";
    }
    return "unknown";
}

PiecewiseMap PiecewiseMap::lsv(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidParameter("LSV map needs alpha in (0,1), got " + std::to_string(alpha));
    PiecewiseMap m;
    m.spec_.family = Family::Lsv;
    m.spec_.alpha = alpha;
    m.phase_ = closed(0.0, 1.0);
    m.lsv_c_ = std::pow(2.0, alpha);
    m.branches_.push_back(analytic(closed(0.0, 0.5), BranchKind::LsvLeft));
    m.branches_.push_back(affine(open_closed(0.5, 1.0), 2.0, 0.5, 0.0));
    m.search_order_ = {0, 1};
    return m;
}

PiecewiseMap PiecewiseMap::farey(double theta, int levels)
{
    if (!(theta > 1.0))
        throw InvalidParameter("Farey map needs theta > 1, got " + std::to_string(theta));
    if (levels < 2)
        throw InvalidParameter("Farey map needs at least 2 explicit levels");
    PiecewiseMap m;
    m.spec_.family = Family::Farey;
    m.spec_.theta = theta;
    m.spec_.levels = levels;
    m.phase_ = closed(0.0, 1.0);

    const int M = levels;
    m.farey_t_.assign(M + 3, 0.0);
    m.farey_a_.assign(M + 2, 0.0);
    for (int n = 1; n <= M + 2; ++n)
        m.farey_t_[n] = std::pow(static_cast<double>(n), -theta);
    for (int n = 1; n <= M + 1; ++n)
        m.farey_a_[n] = m.farey_t_[n] * -std::expm1(-theta * std::log1p(1.0 / n));

    // level 1: (1 - x) / a_1 on [t_2, 1]
    m.branches_.push_back(affine(closed(m.farey_t_[2], 1.0), -1.0 / m.farey_a_[1], 1.0, 0.0));
    // level n: a_{n-1}(x - t_{n+1})/a_n + t_n on [t_{n+1}, t_n)
    for (int n = 2; n <= M; ++n)
        m.branches_.push_back(affine(half_open(m.farey_t_[n + 1], m.farey_t_[n]),
                                     m.farey_a_[n - 1] / m.farey_a_[n], m.farey_t_[n + 1],
                                     m.farey_t_[n]));
    m.branches_.push_back(analytic(half_open(0.0, m.farey_t_[M + 1]), BranchKind::FareyTail));

    m.search_order_.resize(m.branches_.size());
    for (std::size_t i = 0; i < m.branches_.size(); ++i)
        m.search_order_[i] = static_cast<int>(m.branches_.size() - 1 - i);
    return m;
}

PiecewiseMap PiecewiseMap::intermittent(double l1, double k2)
{
    if (!(l1 > 0.0 && k2 >= 1.0 && l1 < 1.0 / k2))
        throw InvalidParameter("intermittent map needs 0 < l1 < 1/k2 <= 1");
    PiecewiseMap m;
    m.spec_.family = Family::Intermittent;
    m.spec_.l1 = l1;
    m.spec_.k2 = k2;
    m.phase_ = closed(-1.0, 1.0);
    m.branches_.push_back(analytic(closed(-1.0, 0.0), BranchKind::IntermittentMinus));
    m.branches_.push_back(analytic(open_closed(0.0, 1.0), BranchKind::IntermittentPlus));
    m.search_order_ = {0, 1};
    return m;
}

PiecewiseMap PiecewiseMap::doubling()
{
    PiecewiseMap m;
    m.spec_.family = Family::Doubling;
    m.phase_ = closed(0.0, 1.0);
    m.branches_.push_back(affine(half_open(0.0, 0.5), 2.0, 0.0, 0.0));
    m.branches_.push_back(affine(closed(0.5, 1.0), 2.0, 0.5, 0.0));
    m.search_order_ = {0, 1};
    return m;
}

PiecewiseMap PiecewiseMap::from_spec(const MapSpec& spec)
{
    switch (spec.family) {
    case Family::Lsv: return lsv(spec.alpha);
    case Family::Farey: return farey(spec.theta, spec.levels);
    case Family::Intermittent: return intermittent(spec.l1, spec.k2);
    case Family::Doubling: return doubling();
    }
    throw InvalidParameter("unknown map family");
}

// ---------------------------------------------------------------------------
// Farey level arithmetic

double PiecewiseMap::farey_t(double n) const
{
    if (n < static_cast<double>(farey_t_.size()))
        return farey_t_[static_cast<std::size_t>(n)];
    return std::pow(n, -spec_.theta);
}

double PiecewiseMap::farey_a(double n) const
{
    if (n < static_cast<double>(farey_a_.size()))
        return farey_a_[static_cast<std::size_t>(n)];
    return std::pow(n, -spec_.theta) * -std::expm1(-spec_.theta * std::log1p(1.0 / n));
}

int PiecewiseMap::farey_label_of(double x) const
{
    if (x >= farey_t_[2])
        return 0;
    if (x <= 0.0)
        return kFareyMaxLabel;
    double n = std::max(2.0, std::ceil(std::pow(x, -1.0 / spec_.theta)) - 1.0);
    // fix rounding: need t_{n+1} <= x < t_n
    for (int guard = 0; guard < 4; ++guard) {
        if (farey_t(n + 1.0) > x)
            n += 1.0;
        else if (farey_t(n) <= x && n > 1.0)
            n -= 1.0;
        else
            break;
    }
    if (n - 1.0 >= kFareyMaxLabel)
        return kFareyMaxLabel;
    return static_cast<int>(n) - 1;
}

double PiecewiseMap::farey_level_value(double n, double x) const
{
    if (n < 1.5)
        return (-1.0 / farey_a_[1]) * (x - 1.0);
    double slope = farey_a(n - 1.0) / farey_a(n);
    return slope * (x - farey_t(n + 1.0)) + farey_t(n);
}

double PiecewiseMap::farey_level_inverse(double n, double y) const
{
    constexpr double tol = 1e-13;
    if (n < 1.5) {
        if (y < -tol || y > 1.0 + tol)
            throw NotInImage("Farey level 1 image is [0,1]");
        return std::clamp(1.0 - farey_a_[1] * y, farey_t_[2], 1.0);
    }
    double lo = farey_t(n), hi = farey_t(n - 1.0);
    if (y < lo - tol || y > hi + tol)
        throw NotInImage("value outside the image of Farey level " + std::to_string(n));
    double x = farey_t(n + 1.0) + (y - lo) * (farey_a(n) / farey_a(n - 1.0));
    return std::clamp(x, farey_t(n + 1.0), farey_t(n));
}

double PiecewiseMap::farey_level(int n) const
{
    if (spec_.family != Family::Farey)
        throw InvalidParameter("farey_level called on a non-Farey map");
    if (n < 1)
        throw InvalidParameter("Farey levels start at 1");
    return farey_t(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// LSV left branch

double PiecewiseMap::lsv_left(double x) const
{
    const double xa = spec_.alpha == 0.5 ? std::sqrt(x) : std::pow(x, spec_.alpha);
    return x + lsv_c_ * x * xa;
}

double PiecewiseMap::lsv_left_deriv(double x) const
{
    const double xa = spec_.alpha == 0.5 ? std::sqrt(x) : std::pow(x, spec_.alpha);
    return 1.0 + lsv_c_ * (1.0 + spec_.alpha) * xa;
}

// ---------------------------------------------------------------------------
// lookup

int PiecewiseMap::branch_index(double x) const
{
    if (!phase_.contains_closure(x))
        throw OutOfPhase("point " + std::to_string(x) + " outside phase interval");
    if (spec_.family == Family::Farey) {
        int label = farey_label_of(x);
        return std::min(label, spec_.levels);
    }
    for (int i : search_order_)
        if (branches_[i].domain.contains(x))
            return i;
    throw OutOfPhase("point not owned by any branch");
}

int PiecewiseMap::label_of(double x) const
{
    if (spec_.family == Family::Farey) {
        if (!phase_.contains_closure(x))
            throw OutOfPhase("point " + std::to_string(x) + " outside phase interval");
        return farey_label_of(x);
    }
    return branch_index(x);
}

Interval PiecewiseMap::label_domain(int label) const
{
    if (spec_.family == Family::Farey) {
        if (label < 0)
            throw InvalidParameter("negative branch label");
        if (label < spec_.levels)
            return branches_[label].domain;
        if (label >= kFareyMaxLabel)
            return half_open(0.0, 0.0);
        double n = label + 1.0;
        return half_open(farey_t(n + 1.0), farey_t(n));
    }
    if (label < 0 || label >= static_cast<int>(branches_.size()))
        throw InvalidParameter("branch label out of range");
    return branches_[label].domain;
}

bool PiecewiseMap::label_increasing(int label) const
{
    if (spec_.family == Family::Farey)
        return label != 0;
    return branches_.at(label).increasing;
}

// ---------------------------------------------------------------------------
// evaluation

double PiecewiseMap::value_on(int label, double x) const
{
    switch (spec_.family) {
    case Family::Lsv:
        return label == kLeft ? lsv_left(x) : 2.0 * (x - 0.5);
    case Family::Doubling:
        return label == kLeft ? 2.0 * x : 2.0 * (x - 0.5);
    case Family::Intermittent:
        if (label == kLeft)
            return x + std::pow(x + 1.0, 1.0 + spec_.l1);
        return -1.0 + 2.0 * std::pow(x, spec_.k2);
    case Family::Farey:
        if (x <= 0.0)
            return 0.0;
        if (label >= kFareyMaxLabel)
            return farey_level_value(farey_label_of(x) + 1.0, x);
        return farey_level_value(label + 1.0, x);
    }
    return x;
}

double PiecewiseMap::abs_derivative_on(int label, double x) const
{
    switch (spec_.family) {
    case Family::Lsv:
        return label == kLeft ? lsv_left_deriv(x) : 2.0;
    case Family::Doubling:
        return 2.0;
    case Family::Intermittent:
        if (label == kLeft)
            return 1.0 + (1.0 + spec_.l1) * std::pow(x + 1.0, spec_.l1);
        return 2.0 * spec_.k2 * std::pow(x, spec_.k2 - 1.0);
    case Family::Farey: {
        if (label == 0)
            return 1.0 / farey_a_[1];
        double n = label >= kFareyMaxLabel ? farey_label_of(x) + 1.0 : label + 1.0;
        return farey_a(n - 1.0) / farey_a(n);
    }
    }
    return 1.0;
}

double PiecewiseMap::eval(double x) const
{
    return value_on(label_of(x), x);
}

double PiecewiseMap::eval_abs_derivative(double x) const
{
    const int label = label_of(x);
    const Interval d = label_domain(label);
    if (x == d.lo || x == d.hi)
        throw AtBranchBoundary("derivative requested at partition point " + std::to_string(x));
    return abs_derivative_on(label, x);
}

double PiecewiseMap::boundary_clearance(double x) const
{
    const Interval d = label_domain(label_of(x));
    return std::min(x - d.lo, d.hi - x);
}

double PiecewiseMap::branch_inverse(int label, double y) const
{
    constexpr double tol = 1e-13;
    switch (spec_.family) {
    case Family::Lsv:
    case Family::Doubling: {
        if (label == kRight || spec_.family == Family::Doubling) {
            const double anchor = label == kLeft ? 0.0 : 0.5;
            if (y < -tol || y > 1.0 + tol)
                throw NotInImage("value outside branch image [0,1]");
            const Interval d = label_domain(label);
            return std::clamp(anchor + 0.5 * y, d.lo, d.hi);
        }
        if (y < -tol || y > 1.0 + tol)
            throw NotInImage("value outside left-branch image [0,1]");
        y = std::clamp(y, 0.0, 1.0);
        return solve_monotone([this](double x) { return lsv_left(x); },
                              [this](double x) { return lsv_left_deriv(x); }, y, 0.0, 0.5);
    }
    case Family::Intermittent: {
        if (y < -1.0 - tol || y > 1.0 + tol)
            throw NotInImage("value outside branch image [-1,1]");
        y = std::clamp(y, -1.0, 1.0);
        if (label == kRight)
            return std::clamp(std::pow(0.5 * (y + 1.0), 1.0 / spec_.k2), 0.0, 1.0);
        const double l1 = spec_.l1;
        return solve_monotone([l1](double x) { return x + std::pow(x + 1.0, 1.0 + l1); },
                              [l1](double x) { return 1.0 + (1.0 + l1) * std::pow(x + 1.0, l1); },
                              y, -1.0, 0.0);
    }
    case Family::Farey:
        if (label >= kFareyMaxLabel)
            throw NotInImage("Farey level beyond representable range");
        return farey_level_inverse(label + 1.0, y);
    }
    throw NotInImage("unknown family");
}

double PiecewiseMap::branch_value(int index, double x) const
{
    const Branch& b = branches_.at(index);
    if (b.kind == BranchKind::Affine && spec_.family != Family::Farey)
        return b.slope * (x - b.anchor) + b.offset;
    if (spec_.family == Family::Farey) {
        if (b.kind == BranchKind::FareyTail) {
            if (x >= b.domain.hi)
                return farey_t(spec_.levels);
            return value_on(farey_label_of(x), x);
        }
        return value_on(index, x);
    }
    return value_on(index, x);
}

double PiecewiseMap::branch_inverse_at(int index, double y) const
{
    const Branch& b = branches_.at(index);
    if (b.kind != BranchKind::FareyTail)
        return branch_inverse(index, y);
    // Tail image is [0, t_M); y in level m has its preimage in level m+1.
    if (y <= 0.0)
        return 0.0;
    if (y >= farey_t(spec_.levels))
        return b.domain.hi;
    const int m = farey_label_of(y) + 1;
    if (m + 1 >= kFareyMaxLabel)
        return 0.0;
    return farey_level_inverse(m + 1.0, y);
}

Interval PiecewiseMap::branch_image(int index) const
{
    const Branch& b = branches_.at(index);
    double u = branch_value(index, b.domain.lo);
    double v = branch_value(index, b.domain.hi);
    return closed(std::min(u, v), std::max(u, v));
}

// ---------------------------------------------------------------------------

std::vector<double> PiecewiseMap::left_preimage_sequence(int m) const
{
    if (spec_.family != Family::Lsv)
        throw InvalidParameter("left preimage sequence is defined for LSV maps");
    if (m < 1)
        throw InvalidParameter("left preimage sequence needs m >= 1");
    std::vector<double> a;
    a.reserve(m);
    a.push_back(0.5);
    for (int j = 1; j < m; ++j)
        a.push_back(branch_inverse(kLeft, a.back()));
    return a;
}

PeriodicOrbit PiecewiseMap::find_periodic_point(const std::vector<int>& word) const
{
    const int p = static_cast<int>(word.size());
    if (p == 0)
        throw NotFound("empty itinerary");

    // Pull the cylinder back from the last letter.
    Interval last = label_domain(word[p - 1]);
    double lo = last.lo, hi = last.hi;
    for (int i = p - 2; i >= 0; --i) {
        const Interval d = label_domain(word[i]);
        double u = value_on(word[i], d.lo), v = value_on(word[i], d.hi);
        double ilo = std::max(std::min(u, v), lo), ihi = std::min(std::max(u, v), hi);
        if (ilo > ihi)
            throw NotFound("empty cylinder for the given itinerary");
        double pu = branch_inverse(word[i], ilo), pv = branch_inverse(word[i], ihi);
        lo = std::max(std::min(pu, pv), d.lo);
        hi = std::min(std::max(pu, pv), d.hi);
        if (lo > hi)
            throw NotFound("empty cylinder for the given itinerary");
    }

    auto g = [&](double x) {
        double y = x;
        for (int l : word)
            y = value_on(l, y);
        return y - x;
    };
    double glo = g(lo), ghi = g(hi);
    double root;
    if (glo == 0.0)
        root = lo;
    else if (ghi == 0.0)
        root = hi;
    else if ((glo > 0) == (ghi > 0))
        throw NotFound("no sign change of f^p - id on the cylinder");
    else {
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi)
                break;
            double gm = g(mid);
            if (gm == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((gm > 0) == (glo > 0))
                lo = mid;
            else
                hi = mid;
        }
        root = 0.5 * (lo + hi);
    }
    if (std::abs(g(root)) > 1e-10)
        throw NotFound("bisection did not converge to a periodic point");

    double mult = 1.0, y = root;
    for (int l : word) {
        mult *= abs_derivative_on(l, y);
        y = value_on(l, y);
    }
    return {root, mult, p};
}

std::vector<double> PiecewiseMap::indifferent_points() const
{
    switch (spec_.family) {
    case Family::Lsv:
    case Family::Farey: return {0.0};
    case Family::Intermittent: return {-1.0};
    case Family::Doubling: return {};
    }
    return {};
}

bool PiecewiseMap::lebesgue_invariant() const
{
    return spec_.family == Family::Doubling;
}

std::optional<double> PiecewiseMap::tail_exponent() const
{
    switch (spec_.family) {
    case Family::Lsv: return 1.0 / spec_.alpha;
    case Family::Farey: return spec_.theta;
    case Family::Intermittent: return 1.0 / (spec_.k2 * spec_.l1);
    case Family::Doubling: return std::nullopt;
    }
    return std::nullopt;
}

} // namespace escape
