#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qcd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// log(1 + e^x) without overflow/underflow.
inline double log1pexp(double x) {
    if (x > 33.0) return x;              // e^{-x} below double epsilon
    if (x > -37.0) return std::log1p(std::exp(x));
    return std::exp(x);                  // log1p(t) ~ t for tiny t
}

/// p = 1/(1+e^{-z}), stable on the whole extended real line.
inline double p_of_z(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

/// 1 - p = 1/(1+e^{z}); keeps full precision when p is close to 1.
inline double one_minus_p_of_z(double z) { return p_of_z(-z); }

/// z = log(p/(1-p)); maps 0 to -inf and 1 to +inf.
inline double z_of_p(double p) {
    if (p <= 0.0) return kNegInf;
    if (p >= 1.0) return kPosInf;
    return std::log(p) - std::log1p(-p);
}

inline double normal_pdf(double x, double mean = 0.0) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    double d = x - mean;
    return inv_sqrt_2pi * std::exp(-0.5 * d * d);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace qcd
