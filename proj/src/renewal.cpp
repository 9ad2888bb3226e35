#include "escape/renewal.hpp"

#include <algorithm>
#include <cmath>

#include <fftw3.h>

#include "escape/numeric.hpp"

namespace escape {

PermutationCache::PermutationCache(int k_max, long n_max) : n_max_(n_max)
{
    if (k_max < 0 || n_max < 0)
        throw InvalidParameter("permutation table bounds must be non-negative");
    table_.assign(static_cast<std::size_t>(k_max) + 1,
                  std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0));
    for (long n = 0; n <= n_max; ++n)
        table_[0][n] = 1.0;
    for (int k = 1; k <= k_max; ++k)
        for (long n = 0; n <= n_max; ++n)
            table_[k][n] = table_[k - 1][n] * static_cast<double>(n - k + 1);
}

double PermutationCache::operator()(long n, int k) const
{
    if (k >= 0 && k <= k_max() && n >= 0 && n <= n_max_)
        return table_[k][n];
    double p = 1.0;
    for (int j = 0; j < k; ++j)
        p *= static_cast<double>(n - j);
    return p;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kMaxTruncation = 1e-3;

void require_tail_mass(const TailSequence& tail)
{
    if (!tail.model && tail.truncation_mass >= kMaxTruncation)
        throw TruncationTooLarge("truncation mass " + std::to_string(tail.truncation_mass) +
                                 " without an extrapolation model");
}

double beyond(const TailSequence& tail, long N)
{
    return tail.model ? tail.model->sum_beyond(static_cast<int>(N)) : 0.0;
}

} // namespace

double first_order_term(const TailSequence& tail, long n)
{
    if (n < 1)
        throw InvalidParameter("first-order term needs n >= 1");
    require_tail_mass(tail);
    const long N = tail.horizon();
    if (n > N)
        return tail.model ? tail.model->sum_beyond(static_cast<int>(n - 1)) : 0.0;
    KahanSum s;
    for (long i = N; i >= n; --i)
        s.add(tail.geq[i]);
    s.add(beyond(tail, N));
    return s.value();
}

double mu_Delta_of_X(const TailSequence& tail)
{
    return 1.0 / first_order_term(tail, 1);
}

double compute_b_n(const TailSequence& tail, int k, long n, const BnOptions& opts)
{
    if (k < 1)
        throw InvalidParameter("tail exponent k must be at least 1");
    if (n < k)
        throw InvalidParameter("b_n needs n >= k");
    if (n > tail.horizon())
        throw HorizonExceeded("b_" + std::to_string(n) + " needs tail values up to n, horizon " +
                              std::to_string(tail.horizon()));
    const auto& v = tail.geq;
    auto gt = [&](long a) { return v[a + 1]; };
    KahanSum s;
    if (k == 1) {
        for (long b = 1; b <= n; ++b)
            s.add(gt(n - b) * v[b]);
        return s.value();
    }
    const long m = n - k + 1;
    const int j = k - 1;
    PermutationCache P(0, 0);
    for (long b = 1; b <= m; ++b) {
        const long a = m - b;
        s.add(gt(a + j) * v[b] * P(a + j, j));
    }
    for (long b = opts.second_sum_from_one ? 1 : 0; b <= m; ++b) {
        const long a = m - b;
        s.add(gt(a) * v[b + j] * P(b + j, j));
    }
    return s.value() / P(n, j);
}

namespace {

// Linear convolution c[i] = sum_j x[j] y[i-j] in long double via FFTW.
std::vector<long double> convolve(const std::vector<long double>& x,
                                  const std::vector<long double>& y)
{
    const std::size_t need = x.size() + y.size() - 1;
    std::size_t L = 1;
    while (L < need)
        L <<= 1;
    const std::size_t H = L / 2 + 1;
    auto* in = static_cast<long double*>(fftwl_malloc(sizeof(long double) * L));
    auto* fx = static_cast<fftwl_complex*>(fftwl_malloc(sizeof(fftwl_complex) * H));
    auto* fy = static_cast<fftwl_complex*>(fftwl_malloc(sizeof(fftwl_complex) * H));
    fftwl_plan px = fftwl_plan_dft_r2c_1d(static_cast<int>(L), in, fx, FFTW_ESTIMATE);
    fftwl_plan py = fftwl_plan_dft_r2c_1d(static_cast<int>(L), in, fy, FFTW_ESTIMATE);
    fftwl_plan back = fftwl_plan_dft_c2r_1d(static_cast<int>(L), fx, in, FFTW_ESTIMATE);

    std::fill(in, in + L, 0.0L);
    std::copy(x.begin(), x.end(), in);
    fftwl_execute(px);
    std::fill(in, in + L, 0.0L);
    std::copy(y.begin(), y.end(), in);
    fftwl_execute(py);
    for (std::size_t i = 0; i < H; ++i) {
        const long double re = fx[i][0] * fy[i][0] - fx[i][1] * fy[i][1];
        const long double im = fx[i][0] * fy[i][1] + fx[i][1] * fy[i][0];
        fx[i][0] = re;
        fx[i][1] = im;
    }
    fftwl_execute(back);
    std::vector<long double> c(need);
    for (std::size_t i = 0; i < need; ++i)
        c[i] = in[i] / static_cast<long double>(L);

    fftwl_destroy_plan(px);
    fftwl_destroy_plan(py);
    fftwl_destroy_plan(back);
    fftwl_free(in);
    fftwl_free(fx);
    fftwl_free(fy);
    return c;
}

} // namespace

std::vector<double> compute_b_batch(const TailSequence& tail, int k, long n_max,
                                    const BnOptions& opts)
{
    if (k < 1)
        throw InvalidParameter("tail exponent k must be at least 1");
    if (n_max > tail.horizon())
        throw HorizonExceeded("batch b_n up to " + std::to_string(n_max) +
                              " exceeds tail horizon " + std::to_string(tail.horizon()));
    std::vector<double> b(static_cast<std::size_t>(n_max) + 1, 0.0);
    if (n_max < k)
        return b;
    const auto& v = tail.geq;
    const int j = k - 1;
    const long m_max = n_max - j;

    // head[b] = v[b] for b >= 1, head[0] = 0
    std::vector<long double> head(static_cast<std::size_t>(m_max) + 1, 0.0L);
    for (long t = 1; t <= m_max; ++t)
        head[t] = v[t];

    if (k == 1) {
        std::vector<long double> g(static_cast<std::size_t>(n_max) + 1);
        for (long a = 0; a <= n_max; ++a)
            g[a] = a + 1 <= tail.horizon() ? v[a + 1] : 0.0L;
        auto c = convolve(g, head);
        for (long n = 1; n <= n_max; ++n)
            b[n] = static_cast<double>(c[n]);
        return b;
    }

    PermutationCache P(k, n_max + 1);
    std::vector<long double> g1(static_cast<std::size_t>(m_max) + 1);
    std::vector<long double> g2(static_cast<std::size_t>(m_max) + 1);
    std::vector<long double> h2(static_cast<std::size_t>(m_max) + 1);
    for (long a = 0; a <= m_max; ++a) {
        g1[a] = a + j + 1 <= tail.horizon() ? static_cast<long double>(v[a + j + 1]) * P(a + j, j)
                                            : 0.0L;
        g2[a] = v[a + 1];
        h2[a] = static_cast<long double>(v[a + j]) * P(a + j, j);
    }
    if (opts.second_sum_from_one)
        h2[0] = 0.0L;
    auto c1 = convolve(g1, head);
    auto c2 = convolve(g2, h2);
    for (long n = k; n <= n_max; ++n) {
        const long m = n - j;
        b[n] = static_cast<double>((c1[m] + c2[m]) / static_cast<long double>(P(n, j)));
    }
    return b;
}

double farey_bn_limit(double theta)
{
    if (!(theta > 1.0 && theta < 2.0))
        throw InvalidParameter("Farey limit needs theta in (1,2)");
    return (1.0 - std::pow(2.0, 1.0 - theta)) / (theta - 1.0) - 1.0;
}

double farey_scaled_difference(double theta, long n)
{
    auto tail = TailSequence::farey_power(theta, static_cast<int>(n));
    const double b1 = compute_b_n(tail, 1, n - 1);
    const double b2 = compute_b_n(tail, 1, n);
    return std::pow(static_cast<double>(n), theta) * (b1 - b2);
}

// ---------------------------------------------------------------------------

std::vector<std::string> prediction_badges()
{
    return {"multiplicative O(mu_X(H) + diam_theta(H)^eps) not modelled",
            "additive O_H(n^(-k-1)) not modelled",
            "o(mu_X(H)) in the escape-rate denominator not modelled"};
}

namespace {

ExpansionPrediction assemble(double c_H, double mu_H, double mu_Delta_X, long n, double first,
                             double first_prev, double bn, double bprev)
{
    if (!(c_H > 0.0) || !(mu_H > 0.0))
        throw InvalidParameter("prediction needs c_H > 0 and mu_H > 0");
    ExpansionPrediction p;
    p.n = n;
    p.first_order = first;
    p.b_n = bn;
    p.b_prev = bprev;
    p.coefficient = 1.0 / (c_H * mu_H);
    p.second_order = p.coefficient * bn;
    p.survival = first + p.second_order;
    const double second_prev = p.coefficient * bprev;
    p.pmf = (first_prev - first) + (second_prev - p.second_order);
    p.mu_Delta_X = mu_Delta_X;
    p.badges = prediction_badges();
    return p;
}

} // namespace

ExpansionPrediction predict(const TailSequence& tail, int k, double c_H, double mu_H,
                            double mu_Delta_X, long n, const BnOptions& opts)
{
    if (n < k || n < 1)
        throw InvalidParameter("prediction needs n >= k");
    const double first = first_order_term(tail, n);
    const double first_prev = n >= 2 ? first_order_term(tail, n - 1) : first + 1.0;
    const double bn = compute_b_n(tail, k, n, opts);
    const double bprev = n - 1 >= k ? compute_b_n(tail, k, n - 1, opts) : 0.0;
    return assemble(c_H, mu_H, mu_Delta_X, n, first, first_prev, bn, bprev);
}

std::vector<ExpansionPrediction> predict_curve(const TailSequence& tail, int k, double c_H,
                                               double mu_H, double mu_Delta_X, long n_max,
                                               const BnOptions& opts)
{
    require_tail_mass(tail);
    const auto b = compute_b_batch(tail, k, n_max, opts);
    const long N = tail.horizon();
    // suffix[n] = sum_{i>=n} v[i]
    std::vector<double> suffix(static_cast<std::size_t>(N) + 2, 0.0);
    KahanSum s;
    s.add(beyond(tail, N));
    suffix[N + 1] = s.value();
    for (long i = N; i >= 1; --i) {
        s.add(tail.geq[i]);
        suffix[i] = s.value();
    }
    std::vector<ExpansionPrediction> out;
    for (long n = std::max<long>(k, 1); n <= n_max; ++n) {
        const double bprev = n - 1 >= k ? b[n - 1] : 0.0;
        const double first_prev = n >= 2 ? suffix[n - 1] : suffix[1] + 1.0;
        out.push_back(assemble(c_H, mu_H, mu_Delta_X, n, suffix[n], first_prev, b[n], bprev));
    }
    return out;
}

long monotone_threshold(std::span<const ExpansionPrediction> curve)
{
    if (curve.empty())
        return 0;
    std::size_t i = curve.size() - 1;
    while (i > 0 && curve[i].survival <= curve[i - 1].survival)
        --i;
    return curve[i].n;
}

// ---------------------------------------------------------------------------

std::string to_string(BTrend t)
{
    switch (t) {
    case BTrend::Decreasing: return "decreasing";
    case BTrend::Increasing: return "increasing";
    case BTrend::Mixed: return "mixed";
    }
    return "mixed";
}

std::string to_string(Order o)
{
    switch (o) {
    case Order::First: return "H1";
    case Order::Second: return "H2";
    case Order::Indistinguishable: return "indistinguishable";
    }
    return "indistinguishable";
}

TrendFit classify_b_trend(std::span<const double> b, int k, long from, long to)
{
    TrendFit fit;
    from = std::max<long>(from, k + 1);
    to = std::min<long>(to, static_cast<long>(b.size()) - 1);
    fit.from = from;
    fit.to = to;
    if (to <= from)
        return fit;
    bool dec = true, inc = true;
    std::vector<double> lx, ly;
    for (long n = from; n <= to; ++n) {
        const double d = b[n - 1] - b[n];
        if (d <= 0.0)
            dec = false;
        if (d >= 0.0)
            inc = false;
        if (d != 0.0) {
            lx.push_back(std::log(static_cast<double>(n)));
            ly.push_back(std::log(std::abs(d)));
        }
    }
    fit.trend = dec ? BTrend::Decreasing : inc ? BTrend::Increasing : BTrend::Mixed;
    if (lx.size() >= 2) {
        const double mx = compensated_sum(lx) / lx.size();
        const double my = compensated_sum(ly) / ly.size();
        KahanSum sxy, sxx;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy.add((lx[i] - mx) * (ly[i] - my));
            sxx.add((lx[i] - mx) * (lx[i] - mx));
        }
        if (sxx.value() > 0.0)
            fit.eta = -sxy.value() / sxx.value() - k;
    }
    return fit;
}

Verdict compare_holes(const HoleContext& h1, const HoleContext& h2, const TrendFit& trend)
{
    if (!h1.admissible || !h2.admissible)
        throw InvalidParameter("hole comparison needs two admissible holes");
    const double scale = std::max(std::abs(h1.mu_H), std::abs(h2.mu_H));
    if (!(scale > 0.0) || std::abs(h1.mu_H - h2.mu_H) > 1e-6 * scale)
        throw MeasureMismatch("hole measures differ: " + std::to_string(h1.mu_H) + " vs " +
                              std::to_string(h2.mu_H));
    Verdict v;
    v.trend = trend;
    v.inv_c1 = 1.0 / h1.c_H;
    v.inv_c2 = 1.0 / h2.c_H;
    v.badges = prediction_badges();
    if (std::abs(h1.c_H - h2.c_H) < 1e-12)
        return v;
    const Order larger_inv = v.inv_c1 > v.inv_c2 ? Order::First : Order::Second;
    const Order smaller_inv = larger_inv == Order::First ? Order::Second : Order::First;
    v.survival_larger = larger_inv;
    switch (trend.trend) {
    case BTrend::Decreasing: v.pmf_larger = larger_inv; break;
    case BTrend::Increasing: v.pmf_larger = smaller_inv; break;
    case BTrend::Mixed: v.pmf_larger = Order::Indistinguishable; break;
    }
    return v;
}

nlohmann::json to_json(const Verdict& v, const HoleContext& h1, const HoleContext& h2)
{
    auto name = [&](Order o) -> std::string {
        switch (o) {
        case Order::First: return h1.name.empty() ? "H1" : h1.name;
        case Order::Second: return h2.name.empty() ? "H2" : h2.name;
        case Order::Indistinguishable: return "indistinguishable";
        }
        return "indistinguishable";
    };
    return {{"holes",
             {{{"name", h1.name}, {"c_H", h1.c_H}, {"mu_H", h1.mu_H}},
              {{"name", h2.name}, {"c_H", h2.c_H}, {"mu_H", h2.mu_H}}}},
            {"inverse_c_H", {v.inv_c1, v.inv_c2}},
            {"survival_larger_late", name(v.survival_larger)},
            {"pmf_larger_late", name(v.pmf_larger)},
            {"b_trend",
             {{"trend", to_string(v.trend.trend)},
              {"eta", v.trend.eta},
              {"window", {v.trend.from, v.trend.to}}}},
            {"badges", v.badges}};
}

} // namespace escape
