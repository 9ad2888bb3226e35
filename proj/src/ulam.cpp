#include "escape/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "escape/numeric.hpp"

namespace escape {

namespace {

using Row = std::vector<std::pair<int, double>>;

int cell_of(const std::vector<double>& e, double y)
{
    auto it = std::upper_bound(e.begin(), e.end(), y);
    int j = static_cast<int>(it - e.begin()) - 1;
    return std::clamp(j, 0, static_cast<int>(e.size()) - 2);
}

// Adds `mass` spread uniformly over the image interval [lo, hi] to row
// entries; the part outside the grid goes to `lost`.
void spread(const std::vector<double>& e, double lo, double hi, double mass, Row& row,
            double& lost)
{
    const double glo = e.front(), ghi = e.back();
    if (hi <= lo) {
        if (lo < glo || lo > ghi)
            lost += mass;
        else
            row.emplace_back(cell_of(e, lo), mass);
        return;
    }
    const double len = hi - lo;
    const double a = std::max(lo, glo), b = std::min(hi, ghi);
    if (b <= a) {
        lost += mass;
        return;
    }
    lost += mass * ((a - lo) + (hi - b)) / len;
    const int j0 = cell_of(e, a), j1 = cell_of(e, b);
    for (int j = j0; j <= j1; ++j) {
        const double ov = std::min(b, e[j + 1]) - std::max(a, e[j]);
        if (ov > 0.0)
            row.emplace_back(j, mass * ov / len);
    }
}

void merge_row(Row& row)
{
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    Row out;
    for (const auto& [j, v] : row) {
        if (!out.empty() && out.back().first == j)
            out.back().second += v;
        else
            out.emplace_back(j, v);
    }
    row.swap(out);
}

} // namespace

// ---------------------------------------------------------------------------

UlamOperator::UlamOperator(std::vector<double> edges, std::vector<Row> rows,
                           std::vector<double> lost)
    : edges_(std::move(edges)), lost_(std::move(lost))
{
    const int n = cells();
    if (static_cast<int>(rows.size()) != n || static_cast<int>(lost_.size()) != n)
        throw InvalidParameter("Ulam rows do not match the grid");
    row_ptr_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i)
        row_ptr_[i + 1] = row_ptr_[i] + static_cast<std::int64_t>(rows[i].size());
    col_.reserve(row_ptr_[n]);
    val_.reserve(row_ptr_[n]);
    for (auto& r : rows)
        for (const auto& [j, v] : r) {
            col_.push_back(j);
            val_.push_back(v);
        }
    build_transpose();
}

void UlamOperator::build_transpose()
{
    const int n = cells();
    t_ptr_.assign(n + 1, 0);
    for (int j : col_)
        ++t_ptr_[j + 1];
    for (int j = 0; j < n; ++j)
        t_ptr_[j + 1] += t_ptr_[j];
    t_row_.assign(col_.size(), 0);
    t_val_.assign(col_.size(), 0.0);
    std::vector<std::int64_t> fill(t_ptr_.begin(), t_ptr_.end() - 1);
    for (int i = 0; i < n; ++i)
        for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            const std::int64_t q = fill[col_[p]]++;
            t_row_[q] = i;
            t_val_[q] = val_[p];
        }
}

double UlamOperator::row_sum(int i) const
{
    KahanSum s;
    for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
        s.add(val_[p]);
    return s.value();
}

void UlamOperator::push(const std::vector<double>& m, std::vector<double>& out) const
{
    const int n = cells();
    out.assign(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::int64_t q = t_ptr_[j]; q < t_ptr_[j + 1]; ++q)
            s += t_val_[q] * m[t_row_[q]];
        out[j] = s;
    }
}

// ---------------------------------------------------------------------------
// construction

UlamOperator build_ulam(const PiecewiseMap& map, const std::vector<double>& edges)
{
    const int n = static_cast<int>(edges.size()) - 1;
    if (n < 1)
        throw InvalidParameter("Ulam grid needs at least one cell");
    struct Dom {
        double lo, hi;
        int index;
    };
    std::vector<Dom> doms;
    for (int b = 0; b < static_cast<int>(map.branches().size()); ++b) {
        const Interval& d = map.branches()[b].domain;
        if (d.hi > d.lo)
            doms.push_back({d.lo, d.hi, b});
    }
    std::sort(doms.begin(), doms.end(), [](const Dom& a, const Dom& b) { return a.lo < b.lo; });
    std::vector<double> dom_lo;
    for (const auto& d : doms)
        dom_lo.push_back(d.lo);

    std::vector<Row> rows(n);
    std::vector<double> lost(n, 0.0);
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) {
        const double ci = edges[i], di = edges[i + 1], w = di - ci;
        auto it = std::upper_bound(dom_lo.begin(), dom_lo.end(), ci);
        std::size_t k = it == dom_lo.begin() ? 0 : static_cast<std::size_t>(it - dom_lo.begin()) - 1;
        Row& row = rows[i];
        double out = 0.0;
        for (; k < doms.size() && doms[k].lo < di; ++k) {
            const Dom& d = doms[k];
            const double u = std::max(ci, d.lo), v = std::min(di, d.hi);
            if (!(v > u))
                continue;
            const double yu = map.branch_value(d.index, u), yv = map.branch_value(d.index, v);
            const bool inc = yv >= yu;
            const double ylo = inc ? yu : yv, yhi = inc ? yv : yu;
            // preimage of y inside [u, v], exact at the image endpoints
            auto pre = [&](double y) {
                if (y <= ylo)
                    return inc ? u : v;
                if (y >= yhi)
                    return inc ? v : u;
                return std::clamp(map.branch_inverse_at(d.index, y), u, v);
            };
            const double glo = edges.front(), ghi = edges.back();
            if (ylo < glo)
                out += std::abs(pre(std::min(glo, yhi)) - pre(ylo));
            if (yhi > ghi)
                out += std::abs(pre(yhi) - pre(std::max(ghi, ylo)));
            const double a = std::max(ylo, glo), b = std::min(yhi, ghi);
            if (b < a)
                continue;
            if (b == a) {
                if (v > u && yhi == ylo)
                    row.emplace_back(cell_of(edges, a), (v - u) / w);
                continue;
            }
            const int j0 = cell_of(edges, a), j1 = cell_of(edges, b);
            double prev_y = a, prev_x = pre(a);
            for (int j = j0; j <= j1; ++j) {
                const double top = std::min(b, edges[j + 1]);
                if (!(top > prev_y))
                    continue;
                const double x = pre(top);
                const double len = std::abs(x - prev_x);
                if (len > 0.0)
                    row.emplace_back(j, len / w);
                prev_y = top;
                prev_x = x;
            }
        }
        merge_row(row);
        lost[i] = out / w;
    }
    return UlamOperator(edges, std::move(rows), std::move(lost));
}

UlamOperator build_ulam(const PiecewiseMap& map, int cells, GradingSpec grading)
{
    if (cells < 1)
        throw InvalidParameter("Ulam grid needs at least one cell");
    if (grading.focus.empty())
        grading.focus = map.indifferent_points();
    return build_ulam(map, graded_edges(map.phase().lo, map.phase().hi, cells, grading));
}

UlamOperator build_ulam_induced(const InducedSystem& sys, const std::vector<double>& edges,
                                const InducedUlamOptions& opts)
{
    const int n = static_cast<int>(edges.size()) - 1;
    if (n < 1)
        throw InvalidParameter("Ulam grid needs at least one cell");
    if (opts.subsamples < 1)
        throw InvalidParameter("at least one subsample per cell is required");
    const Interval& base = sys.base();
    auto probe = [&](double x) {
        if (!base.contains(x))
            x = x <= base.lo ? std::nextafter(base.lo, base.hi) : std::nextafter(base.hi, base.lo);
        return sys.first_return(x, opts.cap);
    };
    using Status = ReturnResult::Status;

    std::vector<Row> rows(n);
    std::vector<double> lost(n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
        const double ci = edges[i], di = edges[i + 1], w = di - ci;
        Row& row = rows[i];
        double out = 0.0;
        auto resolve = [&](auto&& self, double a, const ReturnResult& ra, double b,
                           const ReturnResult& rb, int depth) -> void {
            const double frac = (b - a) / w;
            if (ra.ok() && rb.ok() && ra.cell() == rb.cell()) {
                spread(edges, std::min(ra.y, rb.y), std::max(ra.y, rb.y), frac, row, out);
                return;
            }
            if (ra.status == Status::Saturated && rb.status == Status::Saturated) {
                out += frac;
                return;
            }
            const double mid = 0.5 * (a + b);
            if (depth >= 48 || mid <= a || mid >= b) {
                out += frac;
                return;
            }
            const ReturnResult rm = probe(mid);
            self(self, a, ra, mid, rm, depth + 1);
            self(self, mid, rm, b, rb, depth + 1);
        };
        const int K = opts.subsamples;
        double a = ci;
        ReturnResult ra = probe(a);
        for (int k = 1; k <= K; ++k) {
            const double b = k == K ? di : ci + w * k / K;
            const ReturnResult rb = probe(b);
            resolve(resolve, a, ra, b, rb, 0);
            a = b;
            ra = rb;
        }
        merge_row(row);
        lost[i] = out;
    }
    return UlamOperator(edges, std::move(rows), std::move(lost));
}

UlamOperator open_ulam(const UlamOperator& op, const Hole& hole, HoleConvention conv,
                       const GridDensity* density)
{
    if (hole.none)
        return op;
    const auto& e = op.edges();
    auto nearest = [&](double x) {
        auto it = std::lower_bound(e.begin(), e.end(), x);
        if (it == e.end())
            return static_cast<int>(e.size()) - 1;
        int k = static_cast<int>(it - e.begin());
        if (k > 0 && std::abs(e[k - 1] - x) <= std::abs(e[k] - x))
            --k;
        return k;
    };
    const int first = nearest(hole.lo()), last = nearest(hole.hi());
    if (last <= first)
        throw SnapTooCoarse("hole is narrower than the grid cells around it");
    const double sl = e[first], sh = e[last];
    double orig, snapped;
    if (density) {
        orig = density->mass(hole.lo(), hole.hi());
        snapped = density->mass(sl, sh);
    } else {
        orig = hole.hi() - hole.lo();
        snapped = sh - sl;
    }
    const double err = orig > 0.0 ? std::abs(snapped - orig) / orig : 1.0;
    if (err > 0.01)
        throw SnapTooCoarse("snapping the hole to the grid changes its measure by " +
                            std::to_string(100.0 * err) + "%");

    const int n = op.cells();
    std::vector<Row> rows(n);
    std::vector<double> lost = op.lost();
    for (int i = 0; i < n; ++i) {
        const bool in_hole = i >= first && i < last;
        if (conv == HoleConvention::Presence && in_hole) {
            lost[i] = 0.0;
            continue;
        }
        op.for_row(i, [&](int j, double v) {
            if (conv == HoleConvention::Arrival && j >= first && j < last)
                return;
            rows[i].emplace_back(j, v);
        });
    }
    UlamOperator out(e, std::move(rows), std::move(lost));
    out.open_ = true;
    out.hole_ = hole;
    out.convention_ = conv;
    out.snap_error_ = err;
    out.hole_cells_ = {first, last};
    return out;
}

// ---------------------------------------------------------------------------
// spectra

namespace {

double l1(const std::vector<double>& v)
{
    KahanSum s;
    for (double x : v)
        s.add(std::abs(x));
    return s.value();
}

// Strongly connected components in reverse topological order (sinks first).
std::vector<std::vector<int>> tarjan(const UlamOperator& op)
{
    const int n = op.cells();
    std::vector<int> index(n, -1), low(n, 0), stack;
    std::vector<char> on(n, 0);
    std::vector<std::vector<int>> comps;
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        op.for_row(i, [&](int j, double v) {
            if (v > 0.0)
                adj[i].push_back(j);
        });
    int counter = 0;
    struct Frame {
        int v;
        std::size_t next;
    };
    for (int s = 0; s < n; ++s) {
        if (index[s] >= 0)
            continue;
        std::vector<Frame> call{{s, 0}};
        index[s] = low[s] = counter++;
        stack.push_back(s);
        on[s] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.next < adj[f.v].size()) {
                const int w = adj[f.v][f.next++];
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on[w] = 1;
                    call.push_back({w, 0});
                } else if (on[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const int v = f.v;
            call.pop_back();
            if (!call.empty())
                low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on[w] = 0;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                comps.push_back(std::move(comp));
            }
        }
    }
    return comps;
}

struct LocalPower {
    double lambda = 0.0;
    std::vector<double> vec; // indexed like comp
    int iterations = 0;
    bool converged = false;
};

// Power iteration on the submatrix of one component; `lazy` iterates (M + I) / 2.
LocalPower component_power(const UlamOperator& op, const std::vector<int>& comp,
                           const std::vector<int>& local, double tol, int max_iter, bool lazy)
{
    const int m = static_cast<int>(comp.size());
    LocalPower r;
    std::vector<double> x(m, 1.0 / m), y(m);
    double prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        std::fill(y.begin(), y.end(), 0.0);
        for (int a = 0; a < m; ++a) {
            const double xa = x[a];
            if (xa == 0.0)
                continue;
            op.for_row(comp[a], [&](int j, double v) {
                const int b = local[j];
                if (b >= 0)
                    y[b] += xa * v;
            });
        }
        if (lazy)
            for (int a = 0; a < m; ++a)
                y[a] = 0.5 * (y[a] + x[a]);
        KahanSum s;
        for (double v : y)
            s.add(v);
        const double lam = s.value();
        r.iterations = it;
        if (!(lam > 0.0)) {
            r.lambda = 0.0;
            r.vec = x;
            r.converged = true;
            return r;
        }
        double diff = 0.0;
        for (int a = 0; a < m; ++a) {
            y[a] /= lam;
            diff += std::abs(y[a] - x[a]);
        }
        x.swap(y);
        if (diff < tol && std::abs(lam - prev) <= tol * lam) {
            r.lambda = lazy ? 2.0 * lam - 1.0 : lam;
            r.vec = x;
            r.converged = true;
            return r;
        }
        prev = lam;
    }
    r.lambda = lazy ? 2.0 * prev - 1.0 : prev;
    r.vec = x;
    return r;
}

SpectralResult finish(const UlamOperator& op, std::vector<double> mass, double lambda, int iters)
{
    SpectralResult r;
    r.lambda = lambda;
    r.iterations = iters;
    KahanSum s;
    for (double v : mass)
        s.add(v);
    const double tot = s.value();
    if (tot > 0.0)
        for (double& v : mass)
            v /= tot;
    std::vector<double> pushed;
    op.push(mass, pushed);
    KahanSum res;
    for (int i = 0; i < op.cells(); ++i)
        res.add(std::abs(pushed[i] - lambda * mass[i]));
    r.residual = res.value();
    r.eigvec.resize(op.cells());
    for (int i = 0; i < op.cells(); ++i)
        r.eigvec[i] = mass[i] / op.width(i);
    return r;
}

} // namespace

SpectralResult invariant_density(const UlamOperator& op, double tol, int max_iter)
{
    if (op.is_open())
        throw InvalidParameter("invariant density needs a closed operator");
    const int n = op.cells();
    const double L = op.edges().back() - op.edges().front();
    std::vector<double> m(n), next;
    for (int i = 0; i < n; ++i)
        m[i] = op.width(i) / L;
    double diff = 1.0, lam = 1.0;
    for (int it = 1; it <= max_iter; ++it) {
        op.push(m, next);
        KahanSum s;
        for (double v : next)
            s.add(v);
        lam = s.value();
        if (!(lam > 0.0))
            throw NoConvergence("all mass lost during density iteration", 1.0);
        KahanSum d;
        for (int i = 0; i < n; ++i) {
            next[i] /= lam;
            d.add(std::abs(next[i] - m[i]));
        }
        diff = d.value();
        m.swap(next);
        if (diff < tol)
            return finish(op, std::move(m), lam, it);
    }
    throw NoConvergence("invariant density power iteration", diff);
}

SpectralResult leading_eigenvalue(const UlamOperator& op, double tol, int max_iter)
{
    const int n = op.cells();
    const auto comps = tarjan(op);
    std::vector<int> local(n, -1);
    double best = -1.0;
    std::vector<int> best_comp;
    std::vector<double> best_vec;
    int total_iters = 0;
    for (const auto& comp : comps) {
        double lam;
        std::vector<double> vec;
        if (comp.size() == 1) {
            lam = 0.0;
            op.for_row(comp[0], [&](int j, double v) {
                if (j == comp[0])
                    lam = v;
            });
            vec = {1.0};
        } else {
            for (std::size_t a = 0; a < comp.size(); ++a)
                local[comp[a]] = static_cast<int>(a);
            LocalPower p = component_power(op, comp, local, tol, max_iter, false);
            if (!p.converged)
                p = component_power(op, comp, local, tol, max_iter, true);
            for (int c : comp)
                local[c] = -1;
            total_iters += p.iterations;
            if (!p.converged)
                throw NoConvergence("power iteration on a strongly connected block",
                                    std::abs(p.lambda));
            lam = p.lambda;
            vec = std::move(p.vec);
        }
        // ties keep the most downstream component (components arrive sinks first)
        if (lam > best * (1.0 + 1e-12) + 1e-300) {
            best = lam;
            best_comp = comp;
            best_vec = std::move(vec);
        }
    }
    if (!(best > 0.0)) {
        SpectralResult r;
        r.lambda = 0.0;
        r.eigvec.assign(n, 0.0);
        r.iterations = total_iters;
        return r;
    }

    // extend the component eigenvector to the cells downstream of it
    std::vector<double> m(n, 0.0), next;
    for (std::size_t a = 0; a < best_comp.size(); ++a)
        m[best_comp[a]] = best_vec[a];
    std::vector<char> in_comp(n, 0);
    for (int c : best_comp)
        in_comp[c] = 1;
    for (int it = 0; it < 100000; ++it) {
        op.push(m, next);
        double diff = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = in_comp[i] ? m[i] : next[i] / best;
            diff += std::abs(v - m[i]);
            next[i] = v;
        }
        m.swap(next);
        ++total_iters;
        if (diff <= tol * l1(m))
            break;
    }
    SpectralResult r = finish(op, std::move(m), best, total_iters);
    if (op.is_open() && !op.hole().none && !(r.lambda < 1.0))
        throw NoConvergence("open operator eigenvalue is not below 1", r.lambda - 1.0);
    return r;
}

GridDensity to_density(const UlamOperator& op, const SpectralResult& r)
{
    return GridDensity{op.edges(), r.eigvec};
}

std::vector<double> cell_masses(const UlamOperator& op, const GridDensity& h)
{
    std::vector<double> m(op.cells());
    for (int i = 0; i < op.cells(); ++i)
        m[i] = h.mass(op.edges()[i], op.edges()[i + 1]);
    return m;
}

EscapeCurve escape_curve_ulam(const UlamOperator& op, const std::vector<double>& mass, int N)
{
    if (static_cast<int>(mass.size()) != op.cells())
        throw InvalidParameter("mass vector does not match the grid");
    EscapeCurve c;
    c.source = CurveSource::Ulam;
    c.survival.resize(static_cast<std::size_t>(N) + 1);
    c.std_error.assign(static_cast<std::size_t>(N) + 1, 0.0);
    std::vector<double> m = mass, next;
    auto total = [](const std::vector<double>& v) {
        KahanSum s;
        for (double x : v)
            s.add(x);
        return s.value();
    };
    c.survival[0] = total(m);
    for (int t = 1; t <= N; ++t) {
        op.push(m, next);
        m.swap(next);
        c.survival[t] = std::min(total(m), c.survival[t - 1]);
    }
    return c;
}

std::vector<std::complex<double>> dense_spectrum(const UlamOperator& op)
{
    const int n = op.cells();
    if (n > 512)
        throw InvalidParameter("dense spectrum is limited to 512 cells");
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        op.for_row(i, [&](int j, double v) { M(i, j) = v; });
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(ev.begin(), ev.end(),
              [](const auto& a, const auto& b) { return std::abs(a) > std::abs(b); });
    return ev;
}

void write_triplets(std::ostream& os, const UlamOperator& op)
{
    os.precision(17);
    os << "row,col,value\n";
    for (int i = 0; i < op.cells(); ++i)
        op.for_row(i, [&](int j, double v) { os << i << "," << j << "," << v << "\n"; });
}

nlohmann::json to_json(const SpectralResult& r, bool with_vector)
{
    nlohmann::json j = {
        {"lambda", r.lambda}, {"residual", r.residual}, {"iterations", r.iterations}};
    if (with_vector)
        j["eigvec"] = r.eigvec;
    return j;
}

} // namespace escape
