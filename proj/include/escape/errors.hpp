#pragma once

#include <stdexcept>
#include <string>

namespace escape {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// maps
class OutOfPhase : public Error { using Error::Error; };
class AtBranchBoundary : public Error { using Error::Error; };
class NotInImage : public Error { using Error::Error; };
class NotFound : public Error { using Error::Error; };
class InvalidParameter : public Error { using Error::Error; };

// induced
class Saturated : public Error {
public:
    explicit Saturated(int cap)
        : Error("return time exceeds cap " + std::to_string(cap)), cap_(cap) {}
    int cap() const { return cap_; }

private:
    int cap_;
};
class HitSingularity : public Error { using Error::Error; };

// holes / renewal
class DegenerateMultiplier : public Error { using Error::Error; };
class TruncationTooLarge : public Error { using Error::Error; };
class HorizonExceeded : public Error { using Error::Error; };
class MeasureMismatch : public Error { using Error::Error; };

// ulam
class SnapTooCoarse : public Error { using Error::Error; };
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// experiment runner
class ConfigError : public Error { using Error::Error; };

} // namespace escape
