#pragma once

#include <cmath>
#include <cstdint>

#include "qcd/common.hpp"
#include "qcd/model.hpp"

namespace qcd {

/// Posterior probability of change kept in log-odds form. z = -inf encodes
/// p = 0; the log-odds scale stays exact where 1-p would round to zero.
struct BeliefState {
    double z = kNegInf;

    static BeliefState from_p(double p) { return BeliefState{z_of_p(p)}; }
    static BeliefState from_z(double z) { return BeliefState{z}; }

    double p() const { return p_of_z(z); }
    double one_minus_p() const { return one_minus_p_of_z(z); }
};

/// Stop/take thresholds in both representations: p crosses A/B exactly when
/// z crosses a/b. B = 0 maps to b = -inf (every state is in the take region).
struct ThresholdPair {
    double A, B;   // probability scale
    double a, b;   // log-odds scale

    static ThresholdPair from_probabilities(double A, double B) {
        require(A > 0.0 && A < 1.0, "ThresholdPair: A must be in (0,1)");
        require(B >= 0.0 && B < A, "ThresholdPair: need 0 <= B < A");
        return ThresholdPair{A, B, z_of_p(A), z_of_p(B)};
    }

    static ThresholdPair from_log_odds(double a, double b) {
        require(std::isfinite(a), "ThresholdPair: a must be finite");
        require(b < a, "ThresholdPair: need b < a");
        return ThresholdPair{p_of_z(a), b == kNegInf ? 0.0 : p_of_z(b), a, b};
    }
};

/// Skip update: p + (1-p) rho.
inline double phi_skip(double p, double rho) { return p + (1.0 - p) * rho; }

/// Take update: Bayes step of phi_skip(p) by the likelihood ratio L(x).
template <ObservationModel M>
double phi_take(double x, double p, double rho, const M& model) {
    if (p >= 1.0) return 1.0;
    double q = phi_skip(p, rho);
    double lr = std::exp(model.log_lr(x));
    return q * lr / (q * lr + (1.0 - q));
}

/// Skip update in log-odds: z + |log(1-rho)| + log(1 + rho e^{-z}), computed
/// as log(e^z + rho) - log(1-rho) so that z = -inf needs no special case.
/// Satisfies e^{z'} + 1 = (e^z + 1)/(1-rho) exactly.
inline double z_skip(double z, double rho) {
    double lr = std::log(rho);
    double log_ez_rho = z < lr ? lr + std::log1p(std::exp(z - lr))
                               : z + std::log1p(rho * std::exp(-z));
    return log_ez_rho - std::log1p(-rho);
}

/// Take update in log-odds: z_skip(z) + log L(x).
template <ObservationModel M>
double z_take(double x, double z, double rho, const M& model) {
    return z_skip(z, rho) + model.log_lr(x);
}

/// Number of skip-only steps for the log-odds statistic to climb from x to
/// strictly above y, by direct iteration of the exact recursion.
inline std::int64_t t_exact(double x, double y, double rho) {
    if (x > y) return 0;
    double z = x;
    std::int64_t k = 0;
    while (z <= y) {
        z = z_skip(z, rho);
        ++k;
    }
    return k;
}

/// Continuous approximation (log(1+e^y) - log(1+e^x)) / |log(1-rho)|.
inline double t_closed_form(double x, double y, double rho) {
    double num = log1pexp(y) - (x == kNegInf ? 0.0 : log1pexp(x));
    return num / (-std::log1p(-rho));
}

struct TBracket {
    double lower;
    double upper;
};

/// Bracket implied by the exact geometric identity e^{Z_k}+1 = (e^x+1)/(1-rho)^k:
/// the climb time lies in [cf, cf+1] with cf the closed form above.
inline TBracket t_bracket(double x, double y, double rho) {
    double cf = t_closed_form(x, y, rho);
    return TBracket{cf, cf + 1.0};
}

}  // namespace qcd
