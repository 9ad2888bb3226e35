#include "escape/escape_curve.hpp"

#include <ostream>

namespace escape {

std::string to_string(CurveSource s)
{
    switch (s) {
    case CurveSource::MonteCarlo: return "monte-carlo";
    case CurveSource::Ulam: return "ulam";
    case CurveSource::Prediction: return "prediction";
    }
    return "unknown";
}

void write_csv(std::ostream& os, const EscapeCurve& curve)
{
    os.precision(17);
    os << "# source=" << to_string(curve.source) << "\n";
    os << "n,survival,stderr,samples,seed\n";
    for (int n = 0; n <= curve.horizon(); ++n) {
        const double se = n < static_cast<int>(curve.std_error.size()) ? curve.std_error[n] : 0.0;
        os << n << "," << curve.survival[n] << "," << se << "," << curve.samples << ","
           << curve.seed << "\n";
    }
}

} // namespace escape
