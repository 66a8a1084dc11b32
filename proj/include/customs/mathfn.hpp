#pragma once

#include <cmath>
#include <stdexcept>

namespace customs {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double softplus(double x) { return log1pexp(x); }

// Inverse of softplus; clamped so softplus(softplus_inverse(m)) == m holds
// only for m > 0, tiny targets map to a floor of -40.
inline double softplus_inverse(double m) {
    if (m <= softplus(-40.0)) return -40.0;
    return m + std::log1p(-std::exp(-m));
}

inline double logit(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("logit: p must be in (0,1)");
    return std::log(p / (1.0 - p));
}

// Binary cross-entropy from the logit; stable for large |logit|.
inline double bce_from_logit(double logit_value, double y) {
    return std::fmax(logit_value, 0.0) - logit_value * y + std::log1p(std::exp(-std::abs(logit_value)));
}

}  // namespace customs
