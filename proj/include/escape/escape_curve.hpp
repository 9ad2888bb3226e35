#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace escape {

enum class CurveSource { MonteCarlo, Ulam, Prediction };
std::string to_string(CurveSource s);

/// Survival probabilities mu(tau_H > n), n = 0..N.
struct EscapeCurve {
    std::vector<double> survival;
    std::vector<double> std_error; // binomial, zero for deterministic sources
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
    CurveSource source = CurveSource::MonteCarlo;

    int horizon() const { return static_cast<int>(survival.size()) - 1; }
    /// survival[n-1] - survival[n].
    double pmf(int n) const { return survival[n - 1] - survival[n]; }
};

/// Columns n, survival, stderr, samples, seed.
void write_csv(std::ostream& os, const EscapeCurve& curve);

} // namespace escape
