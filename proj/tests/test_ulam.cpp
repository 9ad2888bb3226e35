#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "escape/errors.hpp"
#include "escape/ulam.hpp"

using namespace escape;

namespace {

// Doubling transfer matrix on n aligned cells, built from the Markov partition.
Eigen::MatrixXd doubling_matrix(int n)
{
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        M(i, (2 * i) % n) += 0.5;
        M(i, (2 * i + 1) % n) += 0.5;
    }
    return M;
}

double entry(const UlamOperator& op, int i, int j)
{
    double v = 0.0;
    op.for_row(i, [&](int c, double x) {
        if (c == j)
            v += x;
    });
    return v;
}

Hole interval_hole(double lo, double hi)
{
    Hole h;
    h.center = 0.5 * (lo + hi);
    h.half_width = 0.5 * (hi - lo);
    h.leb = hi - lo;
    return h;
}

} // namespace

TEST_CASE("doubling map on four aligned cells")
{
    const auto f = PiecewiseMap::doubling();
    const auto op = build_ulam(f, uniform_edges(0.0, 1.0, 4));
    const auto M = doubling_matrix(4);
    for (int i = 0; i < 4; ++i) {
        int count = 0;
        op.for_row(i, [&](int, double v) {
            CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
            ++count;
        });
        CHECK(count == 2);
        for (int j = 0; j < 4; ++j)
            CHECK(entry(op, i, j) == doctest::Approx(M(i, j)).epsilon(1e-15));
    }
    const auto ev = dense_spectrum(op);
    CHECK(std::abs(ev[0]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("doubling Markov hole: eigenvalue and survival from the 3x3 oracle")
{
    const auto f = PiecewiseMap::doubling();
    const auto closed = build_ulam(f, uniform_edges(0.0, 1.0, 4));
    const auto open = open_ulam(closed, interval_hole(0.25, 0.5));
    CHECK(open.hole_cells() == std::pair<int, int>{1, 2});

    // surviving cells {0, 2, 3}
    const int keep[3] = {0, 2, 3};
    const auto M = doubling_matrix(4);
    Eigen::Matrix3d S;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            S(a, b) = M(keep[a], keep[b]);
    Eigen::EigenSolver<Eigen::Matrix3d> es(S);
    double oracle = 0.0;
    for (int i = 0; i < 3; ++i)
        oracle = std::max(oracle, std::abs(es.eigenvalues()[i]));
    CHECK(oracle == doctest::Approx(0.5).epsilon(1e-12));

    const auto r = leading_eigenvalue(open);
    CHECK(std::abs(r.lambda - oracle) < 1e-10);
    CHECK(r.residual < 1e-10);

    // survival[n] = sum of (u M_open^n), u uniform on the four cells
    Eigen::MatrixXd Mo = M;
    Mo.col(1).setZero();
    Eigen::RowVectorXd u = Eigen::RowVectorXd::Constant(4, 0.25);
    const auto curve = escape_curve_ulam(open, std::vector<double>(4, 0.25), 30);
    CHECK(curve.survival[0] == 1.0);
    CHECK(curve.survival[1] == doctest::Approx(0.75).epsilon(1e-15));
    for (int n = 1; n <= 30; ++n) {
        u = u * Mo;
        CHECK(curve.survival[n] == doctest::Approx(u.sum()).epsilon(1e-14));
    }
}

TEST_CASE("empty and full holes")
{
    const auto f = PiecewiseMap::doubling();
    const auto closed = build_ulam(f, uniform_edges(0.0, 1.0, 8));
    const auto same = open_ulam(closed, Hole::empty());
    CHECK_FALSE(same.is_open());
    CHECK(same.nonzeros() == closed.nonzeros());
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            CHECK(entry(same, i, j) == entry(closed, i, j));
    const auto curve = escape_curve_ulam(same, std::vector<double>(8, 0.125), 20);
    for (double s : curve.survival)
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(leading_eigenvalue(same).lambda == doctest::Approx(1.0).epsilon(1e-12));

    const auto zero = open_ulam(closed, interval_hole(0.0, 1.0));
    CHECK(zero.nonzeros() == 0);
    for (int i = 0; i < 8; ++i)
        CHECK(zero.row_sum(i) == 0.0);
    CHECK(leading_eigenvalue(zero).lambda == 0.0);
}

TEST_CASE("hole narrower than a cell cannot be snapped")
{
    const auto closed = build_ulam(PiecewiseMap::doubling(), uniform_edges(0.0, 1.0, 16));
    CHECK_THROWS_AS(open_ulam(closed, interval_hole(0.30, 0.31)), SnapTooCoarse);
    CHECK_THROWS_AS(open_ulam(closed, interval_hole(0.245, 0.33)), SnapTooCoarse);
}

TEST_CASE("presence convention removes rows")
{
    const auto closed = build_ulam(PiecewiseMap::doubling(), uniform_edges(0.0, 1.0, 4));
    const auto open = open_ulam(closed, interval_hole(0.25, 0.5), HoleConvention::Presence);
    CHECK(open.row_sum(1) == 0.0);
    CHECK(open.row_sum(0) == doctest::Approx(1.0));
    CHECK(entry(open, 0, 1) == doctest::Approx(0.5));
}

TEST_CASE("lsv rows sum to one on a graded grid")
{
    const auto f = PiecewiseMap::lsv(0.5);
    const auto op = build_ulam(f, 4096);
    CHECK(op.cells() == 4096);
    double worst = 0.0;
    for (int i = 0; i < op.cells(); ++i) {
        worst = std::max(worst, std::abs(op.row_sum(i) + op.lost()[i] - 1.0));
        CHECK(op.lost()[i] == 0.0);
        op.for_row(i, [&](int, double v) { CHECK(v >= 0.0); });
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("farey transitions climb exactly one level")
{
    const int M = 40;
    const auto f = PiecewiseMap::farey(2.0, M);
    std::vector<double> edges{0.0};
    for (int n = M + 1; n >= 2; --n)
        for (int s = 0; s < 3; ++s) {
            const double lo = std::pow(n, -2.0), hi = std::pow(n - 1.0, -2.0);
            edges.push_back(lo + (hi - lo) * s / 3.0);
        }
    edges.push_back(1.0);
    const auto op = build_ulam(f, edges);
    for (int i = 0; i < op.cells(); ++i) {
        const double mid = 0.5 * (edges[i] + edges[i + 1]);
        const int n = static_cast<int>(std::floor(std::pow(mid, -0.5))); // mid in [t_{n+1}, t_n)
        if (n < 2 || n > M - 1)
            continue;
        const double tlo = std::pow(n, -2.0), thi = std::pow(n - 1.0, -2.0);
        double inside = 0.0;
        op.for_row(i, [&](int j, double v) {
            const double c = 0.5 * (edges[j] + edges[j + 1]);
            if (c >= tlo && c < thi)
                inside += v;
        });
        CHECK(inside == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("invariant densities")
{
    SUBCASE("doubling is uniform")
    {
        const auto op = build_ulam(PiecewiseMap::doubling(), uniform_edges(0.0, 1.0, 64));
        const auto r = invariant_density(op);
        CHECK(r.lambda == doctest::Approx(1.0).epsilon(1e-14));
        for (double h : r.eigvec)
            CHECK(h == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("lsv density blows up at the fixed point and resolves consistently")
    {
        const auto f = PiecewiseMap::lsv(0.5);
        auto density_of = [&](int cells) {
            const auto op = build_ulam(f, cells);
            const auto r = invariant_density(op, 1e-12);
            CHECK(r.lambda == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(r.residual < 1e-10);
            return to_density(op, r);
        };
        const auto h1 = density_of(2048), h2 = density_of(4096);
        CHECK(h1.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
        for (double a : {0.01, 0.1, 0.3, 0.5, 0.7})
            CHECK(h1.mass(a, a + 0.05) == doctest::Approx(h2.mass(a, a + 0.05)).epsilon(2e-3));
        CHECK(h2.at(1e-4) > h2.at(1e-2));
        CHECK(h2.at(1e-2) > h2.at(0.3));
        CHECK(h2.at(0.3) > h2.at(0.9));
        // h(x) x^alpha stays bounded near 0
        for (double x : {1e-6, 1e-5, 1e-4, 1e-3}) {
            const double scaled = h2.at(x) * std::sqrt(x);
            CHECK(scaled > 0.05);
            CHECK(scaled < 5.0);
        }
    }
}

TEST_CASE("induced Farey operator on the first level has uniform density")
{
    const auto f = PiecewiseMap::farey(2.0, 400);
    InducedSystem sys(f, farey_base(f, 2));
    const auto edges = uniform_edges(sys.base().lo, sys.base().hi, 256);
    const auto op = build_ulam_induced(sys, edges);
    for (int i = 0; i < op.cells(); ++i)
        CHECK(op.row_sum(i) + op.lost()[i] == doctest::Approx(1.0).epsilon(1e-12));
    const auto r = invariant_density(op, 1e-13);
    const double uniform = 1.0 / sys.base().length();
    for (double h : r.eigvec)
        CHECK(h == doctest::Approx(uniform).epsilon(5e-3));
}

TEST_CASE("property: open operators are substochastic")
{
    const auto op = build_ulam(PiecewiseMap::lsv(0.5), 1024);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.55, 0.95);
    for (int trial = 0; trial < 10; ++trial) {
        const double c = U(rng);
        const auto& e = op.edges();
        const int k = static_cast<int>(std::lower_bound(e.begin(), e.end(), c) - e.begin());
        const auto open = open_ulam(op, interval_hole(e[k - 2], e[k + 2]));
        for (int i = 0; i < open.cells(); ++i) {
            const double s = open.row_sum(i);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0 + 1e-12);
        }
        const auto r = leading_eigenvalue(open);
        CHECK(r.lambda < 1.0);
        CHECK(r.lambda > 0.9);
        for (double v : r.eigvec)
            CHECK(v >= 0.0);
        const auto curve = escape_curve_ulam(open, std::vector<double>(open.cells(), 1.0 / open.cells()), 50);
        for (int n = 1; n <= 50; ++n)
            CHECK(curve.survival[n] <= curve.survival[n - 1]);
    }
}

TEST_CASE("serialisation")
{
    const auto op = build_ulam(PiecewiseMap::doubling(), uniform_edges(0.0, 1.0, 2));
    std::ostringstream os;
    write_triplets(os, op);
    CHECK(os.str().rfind("row,col,value\n", 0) == 0);
    const auto r = leading_eigenvalue(op);
    const auto j = to_json(r, true);
    CHECK(j["lambda"].get<double>() == doctest::Approx(1.0));
    CHECK(j["eigvec"].size() == 2);
}
