#pragma once

#include <memory>
#include <stdexcept>
#include <variant>

#include "qcd/bellman.hpp"
#include "qcd/common.hpp"
#include "qcd/model.hpp"
#include "qcd/posterior.hpp"
#include "qcd/rng.hpp"

namespace qcd {

/// Take an observation while p >= B, declare the change when p > A.
struct TwoThresholdPolicy {
    ThresholdPair thresholds;
};

/// Classical always-observe rule; decision-equivalent to TwoThreshold with B=0.
struct ShiryaevPolicy {
    double A;
    double a;

    static ShiryaevPolicy from_probability(double A) {
        require(A > 0.0 && A < 1.0, "ShiryaevPolicy: A must be in (0,1)");
        return ShiryaevPolicy{A, z_of_p(A)};
    }
    static ShiryaevPolicy from_log_odds(double a) {
        require(std::isfinite(a), "ShiryaevPolicy: a must be finite");
        return ShiryaevPolicy{p_of_z(a), a};
    }
};

/// Takes each observation independently with probability eps, skips otherwise.
struct FractionalSamplingPolicy {
    double A;
    double a;
    double eps;

    static FractionalSamplingPolicy from_log_odds(double a, double eps) {
        require(std::isfinite(a), "FractionalSamplingPolicy: a must be finite");
        require(eps >= 0.0 && eps <= 1.0, "FractionalSamplingPolicy: eps must be in [0,1]");
        return FractionalSamplingPolicy{p_of_z(a), a, eps};
    }
};

using PolicySpec =
    std::variant<ShiryaevPolicy, TwoThresholdPolicy, FractionalSamplingPolicy, TabulatedDpPolicy>;

/// stop_now: declare the change at the current state.
/// take_next: observe at the next step; false by convention when stopping.
struct Decision {
    bool stop_now = false;
    bool take_next = false;
};

inline Decision decide(const PolicySpec& policy, const BeliefState& state, Rng& rng) {
    return std::visit(
        [&](const auto& pol) -> Decision {
            using T = std::decay_t<decltype(pol)>;
            if constexpr (std::is_same_v<T, TwoThresholdPolicy>) {
                if (state.z > pol.thresholds.a) return {true, false};
                return {false, state.z >= pol.thresholds.b};
            } else if constexpr (std::is_same_v<T, ShiryaevPolicy>) {
                if (state.z > pol.a) return {true, false};
                return {false, true};
            } else if constexpr (std::is_same_v<T, FractionalSamplingPolicy>) {
                if (state.z > pol.a) return {true, false};
                return {false, rng.bernoulli(pol.eps)};
            } else {
                if (!pol.grid || pol.grid->size() == 0)
                    throw std::runtime_error("TabulatedDpPolicy: uninitialized grid");
                double p = state.p();
                if (pol.grid->stop_at(p)) return {true, false};
                return {false, pol.grid->take_at(p)};
            }
        },
        policy);
}

/// Stop threshold of the policy in log-odds form (for horizon heuristics).
inline double stop_log_odds(const PolicySpec& policy) {
    return std::visit(
        [](const auto& pol) -> double {
            using T = std::decay_t<decltype(pol)>;
            if constexpr (std::is_same_v<T, TwoThresholdPolicy>) {
                return pol.thresholds.a;
            } else if constexpr (std::is_same_v<T, ShiryaevPolicy>) {
                return pol.a;
            } else if constexpr (std::is_same_v<T, FractionalSamplingPolicy>) {
                return pol.a;
            } else {
                if (!pol.grid) throw std::runtime_error("TabulatedDpPolicy: uninitialized grid");
                return z_of_p(extract_structure(*pol.grid).stop_threshold_A);
            }
        },
        policy);
}

struct StepResult {
    BeliefState state;
    Decision decision;
    bool observation_used = false;
};

/// One transition: apply the policy at time k, consume X_{k+1} only on a take.
template <ObservationModel M>
StepResult step(const PolicySpec& policy, const BeliefState& state, const Scenario<M>& scenario,
                std::int64_t k, double rho, const M& model, Rng& rng) {
    Decision d = decide(policy, state, rng);
    if (d.stop_now) return {state, d, false};
    if (d.take_next) {
        double x = scenario.observation(k + 1);
        return {BeliefState::from_z(z_take(x, state.z, rho, model)), d, true};
    }
    return {BeliefState::from_z(z_skip(state.z, rho)), d, false};
}

inline PolicySpec to_tabulated_policy(std::shared_ptr<const ValueGrid> grid) {
    require(grid != nullptr && grid->size() > 0, "to_tabulated_policy: empty grid");
    return TabulatedDpPolicy{std::move(grid)};
}

}  // namespace qcd
