#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "escape/induced.hpp"

namespace escape {

/// Falling factorials P_n^k = n (n-1) ... (n-k+1), P_n^0 = 1.
class PermutationCache {
public:
    PermutationCache(int k_max, long n_max);
    double operator()(long n, int k) const;
    int k_max() const { return static_cast<int>(table_.size()) - 1; }
    long n_max() const { return n_max_; }

private:
    long n_max_;
    std::vector<std::vector<double>> table_; // table_[k][n]
};

/// mu_Delta(X) = 1 / sum_{i>=1} mu_X(R >= i). Throws TruncationTooLarge.
double mu_Delta_of_X(const TailSequence& tail);

/// sum_{i>=n} mu_X(R >= i), with the model tail beyond the horizon when present.
double first_order_term(const TailSequence& tail, long n);

struct BnOptions {
    bool second_sum_from_one = false; // k >= 2: start the second sum at b = 1
};

/// b_n by direct convolution. Throws HorizonExceeded when n > horizon.
double compute_b_n(const TailSequence& tail, int k, long n, const BnOptions& opts = {});

/// b_1..b_n_max in one pass (FFT convolution in extended precision); index 0 unused.
std::vector<double> compute_b_batch(const TailSequence& tail, int k, long n_max,
                                    const BnOptions& opts = {});

/// (1 - 2^(1-theta)) / (theta - 1) - 1.
double farey_bn_limit(double theta);

/// n^theta (b_{n-1} - b_n) for the tail n^(-theta), by direct convolution.
double farey_scaled_difference(double theta, long n);

struct ExpansionPrediction {
    long n = 0;
    double first_order = 0.0;
    double b_n = 0.0;
    double b_prev = 0.0;
    double coefficient = 0.0; // 1 / (c_H mu_H)
    double second_order = 0.0;
    double survival = 0.0;     // mu_Delta(tau > n) / mu_Delta(X)
    double pmf = 0.0;          // mu_Delta(tau = n) / mu_Delta(X)
    double mu_Delta_X = 0.0;
    std::vector<std::string> badges;

    double survival_abs() const { return mu_Delta_X * survival; }
    double pmf_abs() const { return mu_Delta_X * pmf; }
};

/// Unmodelled error terms attached to every prediction.
std::vector<std::string> prediction_badges();

ExpansionPrediction predict(const TailSequence& tail, int k, double c_H, double mu_H,
                            double mu_Delta_X, long n, const BnOptions& opts = {});

/// Predictions for n = 1..n_max using the batch b_n.
std::vector<ExpansionPrediction> predict_curve(const TailSequence& tail, int k, double c_H,
                                               double mu_H, double mu_Delta_X, long n_max,
                                               const BnOptions& opts = {});

/// First n from which predicted survival is non-increasing up to the end.
long monotone_threshold(std::span<const ExpansionPrediction> curve);

// ---------------------------------------------------------------------------

enum class BTrend { Decreasing, Increasing, Mixed };
std::string to_string(BTrend t);

struct TrendFit {
    BTrend trend = BTrend::Mixed;
    double eta = 0.0; // |b_{n-1} - b_n| ~ n^(-k-eta)
    long from = 0;
    long to = 0;
};

/// Trend of b over [from, to] (b indexed by n).
TrendFit classify_b_trend(std::span<const double> b, int k, long from, long to);

struct HoleContext {
    std::string name;
    double c_H = 1.0;
    double mu_H = 0.0;
    bool admissible = true;
};

enum class Order { First, Second, Indistinguishable };
std::string to_string(Order o);

struct Verdict {
    Order survival_larger = Order::Indistinguishable; // larger mu(tau > n), large n
    Order pmf_larger = Order::Indistinguishable;      // larger mu(tau = n), large n
    TrendFit trend;
    double inv_c1 = 0.0;
    double inv_c2 = 0.0;
    std::vector<std::string> badges;
};

/// Ordering of two equal-measure holes from c_H and the trend of b.
/// Throws MeasureMismatch when the measures differ by more than 1e-6 relative.
Verdict compare_holes(const HoleContext& h1, const HoleContext& h2, const TrendFit& trend);

nlohmann::json to_json(const Verdict& v, const HoleContext& h1, const HoleContext& h2);

} // namespace escape
