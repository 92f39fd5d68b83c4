#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qcd/common.hpp"
#include "qcd/model.hpp"
#include "qcd/parallel.hpp"
#include "qcd/policy.hpp"
#include "qcd/posterior.hpp"
#include "qcd/stats.hpp"

namespace qcd {

/// Outcome of one simulated run of a policy against one scenario.
struct TrialRecord {
    std::int64_t gamma = 0;
    std::int64_t tau = 0;
    std::int64_t obs_before = 0;   // takes at steps k <= min(tau, gamma-1)
    std::int64_t obs_after = 0;    // takes at steps gamma <= k <= tau
    std::int64_t delay_plus = 0;   // (tau - gamma)^+
    double one_minus_p_tau = 1.0;
    bool false_alarm = false;      // tau < gamma
    bool truncated = false;

    bool operator==(const TrialRecord&) const = default;
};

struct McOptions {
    std::int64_t horizon_cap = 0;  // 0 = derive from policy and prior
    double p0 = 0.0;
    int n_workers = 0;             // 0 = hardware concurrency
    std::int64_t chunk = 4096;     // trials per work unit; fixed => reproducible
};

/// Default simulation cap: generous multiple of the expected change time plus
/// the expected passage time to the stop threshold.
template <ObservationModel M>
std::int64_t default_horizon_cap(const PolicySpec& policy, const M& model,
                                 const GeometricPrior& prior) {
    double a = stop_log_odds(policy);
    double denom = model.kl_post_pre() + prior.log_drift();
    return static_cast<std::int64_t>(std::ceil(20.0 / prior.rho + 40.0 * std::max(a, 1.0) / denom));
}

template <ObservationModel M>
TrialRecord run_scenario(const PolicySpec& policy, const M& model, const GeometricPrior& prior,
                         const Scenario<M>& scenario, std::uint64_t policy_seed,
                         std::int64_t horizon_cap, double p0 = 0.0) {
    Rng policy_rng(policy_seed);
    TrialRecord r;
    r.gamma = scenario.change_time();

    BeliefState state = BeliefState::from_p(p0);
    std::int64_t k = 0;
    for (;;) {
        Decision d = decide(policy, state, policy_rng);
        if (k >= 1 && d.stop_now) {
            r.tau = k;
            break;
        }
        if (k >= horizon_cap) {
            r.tau = k;
            r.truncated = true;
            break;
        }
        if (d.take_next) {
            std::int64_t j = k + 1;  // index of the observation being consumed
            if (j < r.gamma)
                ++r.obs_before;
            else
                ++r.obs_after;
            double x = scenario.observation(j);
            state = BeliefState::from_z(z_take(x, state.z, prior.rho, model));
        } else {
            state = BeliefState::from_z(z_skip(state.z, prior.rho));
        }
        ++k;
    }
    r.delay_plus = std::max<std::int64_t>(0, r.tau - r.gamma);
    r.false_alarm = r.tau < r.gamma;
    r.one_minus_p_tau = state.one_minus_p();
    return r;
}

/// Simulates one seeded trial: the scenario and any policy randomness are both
/// derived from the trial seed.
template <ObservationModel M>
TrialRecord run_trial(const PolicySpec& policy, const M& model, const GeometricPrior& prior,
                      std::uint64_t seed, std::int64_t horizon_cap, double p0 = 0.0) {
    Scenario<M> scenario(model, prior, seed);
    return run_scenario(policy, model, prior, scenario, derive_seed(seed, 3), horizon_cap, p0);
}

/// Point estimates with standard errors. PFA uses the conditional-expectation
/// estimator mean(1 - p_tau), which converges far faster than the indicator
/// when the false alarm probability is small; the indicator mean is kept for
/// consistency checks. ADD/ANO/ANO1 are reported conditionally on tau >= gamma
/// alongside the unconditional mean of (tau - gamma)^+.
struct MetricsEstimate {
    double add = 0.0, add_se = 0.0;                  // E[tau - gamma | tau >= gamma]
    double add_unconditional = 0.0, add_unc_se = 0.0;  // E[(tau - gamma)^+]
    double pfa = 0.0, pfa_se = 0.0;                  // mean(1 - p_tau)
    double pfa_indicator = 0.0, pfa_indicator_se = 0.0;
    double ano = 0.0, ano_se = 0.0;                  // E[obs before | tau >= gamma]
    double ano1 = 0.0, ano1_se = 0.0;                // E[obs after | tau >= gamma]
    double mean_tau = 0.0;
    std::int64_t n_trials = 0;
    std::int64_t n_detections = 0;                   // trials with tau >= gamma
    double truncated_fraction = 0.0;
    bool reliability_warning = false;
    double rho = 0.0;
    double pi0 = 0.0;

    double ano_percent() const { return ano * rho / (1.0 - pi0) * 100.0; }
};

namespace detail {

struct MetricsSums {
    Accumulator delay_cond;  // over tau >= gamma
    Accumulator delay_plus;  // over all trials
    Accumulator pfa_soft;
    Accumulator pfa_ind;
    Accumulator ano;        // over tau >= gamma
    Accumulator ano1;       // over tau >= gamma
    Accumulator tau;
    std::int64_t truncated = 0;

    void add(const TrialRecord& r) {
        delay_plus.add(static_cast<double>(r.delay_plus));
        pfa_soft.add(r.one_minus_p_tau);
        pfa_ind.add(r.false_alarm ? 1.0 : 0.0);
        tau.add(static_cast<double>(r.tau));
        if (!r.false_alarm) {
            delay_cond.add(static_cast<double>(r.tau - r.gamma));
            ano.add(static_cast<double>(r.obs_before));
            ano1.add(static_cast<double>(r.obs_after));
        }
        if (r.truncated) ++truncated;
    }

    void combine(const MetricsSums& o) {
        delay_cond.combine(o.delay_cond);
        delay_plus.combine(o.delay_plus);
        pfa_soft.combine(o.pfa_soft);
        pfa_ind.combine(o.pfa_ind);
        ano.combine(o.ano);
        ano1.combine(o.ano1);
        tau.combine(o.tau);
        truncated += o.truncated;
    }
};

}  // namespace detail

/// Monte Carlo estimate over n_trials independent trials. Trial t uses the
/// t-th derived stream of master_seed; chunk boundaries are fixed, so the
/// result is bit-identical for any worker count.
template <ObservationModel M>
MetricsEstimate estimate_metrics(const PolicySpec& policy, const M& model,
                                 const GeometricPrior& prior, std::int64_t n_trials,
                                 std::uint64_t master_seed, const McOptions& opt = {}) {
    require(n_trials >= 1, "estimate_metrics: n_trials must be positive");
    std::int64_t cap = opt.horizon_cap > 0 ? opt.horizon_cap
                                           : default_horizon_cap(policy, model, prior);
    std::int64_t chunk = std::max<std::int64_t>(1, opt.chunk);
    std::int64_t n_chunks = (n_trials + chunk - 1) / chunk;
    std::vector<detail::MetricsSums> partial(static_cast<std::size_t>(n_chunks));

    parallel_chunks(n_chunks, opt.n_workers, [&](std::int64_t c) {
        detail::MetricsSums sums;
        std::int64_t lo = c * chunk, hi = std::min(lo + chunk, n_trials);
        for (std::int64_t t = lo; t < hi; ++t) {
            TrialRecord r = run_trial(policy, model, prior, derive_seed(master_seed, static_cast<std::uint64_t>(t)),
                                      cap, opt.p0);
            sums.add(r);
        }
        partial[static_cast<std::size_t>(c)] = sums;
    });

    detail::MetricsSums total = pairwise_combine(std::move(partial));

    MetricsEstimate e;
    e.add = total.delay_cond.mean();
    e.add_se = total.delay_cond.se();
    e.add_unconditional = total.delay_plus.mean();
    e.add_unc_se = total.delay_plus.se();
    e.pfa = total.pfa_soft.mean();
    e.pfa_se = total.pfa_soft.se();
    e.pfa_indicator = total.pfa_ind.mean();
    e.pfa_indicator_se = total.pfa_ind.se();
    e.ano = total.ano.mean();
    e.ano_se = total.ano.se();
    e.ano1 = total.ano1.mean();
    e.ano1_se = total.ano1.se();
    e.mean_tau = total.tau.mean();
    e.n_trials = n_trials;
    e.n_detections = total.delay_cond.n;
    e.truncated_fraction = static_cast<double>(total.truncated) / static_cast<double>(n_trials);
    e.reliability_warning = e.truncated_fraction > 1e-3;
    e.rho = prior.rho;
    e.pi0 = prior.pi0;
    return e;
}

struct CalibrationResult {
    double threshold = 0.0;        // calibrated a or b (log-odds)
    double threshold_prob = 0.0;   // same threshold on the probability scale
    double achieved = 0.0;
    double target = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Finds a with PFA(gamma(a, b)) = target_pfa. PFA <= e^{-a} gives the seed
/// a0 = -log(target); since log PFA is close to linear in a with slope -1,
/// each Monte Carlo evaluation is turned into the multiplicative correction
/// a <- a + log(achieved/target), with a bisection bracket as a guard.
template <ObservationModel M>
CalibrationResult calibrate_a(double target_pfa, double b, const M& model,
                              const GeometricPrior& prior, std::int64_t n_trials,
                              double tol_rel = 0.02, std::uint64_t master_seed = 1,
                              const McOptions& opt = {}) {
    require(target_pfa > 0.0 && target_pfa < 0.5, "calibrate_a: target_pfa must be in (0, 0.5)");
    double a = -std::log(target_pfa);
    double lo = 0.0, hi = kPosInf;  // PFA(lo) > target > PFA(hi)
    CalibrationResult res;
    res.target = target_pfa;
    for (int it = 1; it <= 60; ++it) {
        PolicySpec pol = b == kNegInf
                             ? PolicySpec(ShiryaevPolicy::from_log_odds(a))
                             : PolicySpec(TwoThresholdPolicy{ThresholdPair::from_log_odds(a, b)});
        MetricsEstimate m = estimate_metrics(pol, model, prior, n_trials,
                                             derive_seed(master_seed, static_cast<std::uint64_t>(it)), opt);
        res.threshold = a;
        res.threshold_prob = p_of_z(a);
        res.achieved = m.pfa;
        res.iterations = it;
        if (std::abs(m.pfa / target_pfa - 1.0) <= tol_rel) {
            res.converged = true;
            return res;
        }
        if (m.pfa > target_pfa)
            lo = std::max(lo, a);
        else
            hi = std::min(hi, a);
        double next = a + std::log(std::max(m.pfa, 1e-300) / target_pfa);
        if (next <= lo || next >= hi)
            next = std::isfinite(hi) ? 0.5 * (lo + hi) : lo + 1.0;
        if (b != kNegInf) next = std::max(next, b + 1e-2);  // keep b < a
        a = next;
    }
    throw CalibrationError("calibrate_a: no bracket after 60 iterations");
}

/// Finds b hitting a target ANO% at fixed a. ANO is monotone non-increasing
/// in b, so this is a bisection; the bracket grows downward from a if needed.
template <ObservationModel M>
CalibrationResult calibrate_b(double target_ano_percent, double a, const M& model,
                              const GeometricPrior& prior, std::int64_t n_trials,
                              double tol_rel = 0.03, std::uint64_t master_seed = 1,
                              const McOptions& opt = {}) {
    require(target_ano_percent > 0.0 && target_ano_percent < 100.0,
            "calibrate_b: target must be in (0, 100)");
    auto eval = [&](double b, int it) {
        PolicySpec pol = TwoThresholdPolicy{ThresholdPair::from_log_odds(a, b)};
        MetricsEstimate m = estimate_metrics(pol, model, prior, n_trials,
                                             derive_seed(master_seed, static_cast<std::uint64_t>(it)), opt);
        return m.ano_percent();
    };

    CalibrationResult res;
    res.target = target_ano_percent;
    int it = 0;

    double lo = -1.0, hi = a;  // ANO%(lo) >= target >= ANO%(hi)
    double v_lo = eval(lo, ++it);
    while (v_lo < target_ano_percent) {
        hi = lo;
        lo = lo * 2.0 - 2.0;
        if (lo < -200.0) {
            // The target exceeds what even b = -inf can deliver.
            res.threshold = kNegInf;
            res.threshold_prob = 0.0;
            res.achieved = v_lo;
            res.iterations = it;
            return res;
        }
        v_lo = eval(lo, ++it);
    }

    double b = lo, achieved = v_lo;
    while (it < 60) {
        b = 0.5 * (lo + hi);
        achieved = eval(b, ++it);
        if (std::abs(achieved / target_ano_percent - 1.0) <= tol_rel) {
            res.threshold = b;
            res.threshold_prob = p_of_z(b);
            res.achieved = achieved;
            res.iterations = it;
            res.converged = true;
            return res;
        }
        if (achieved >= target_ano_percent)
            lo = b;
        else
            hi = b;
        if (hi - lo < 1e-4) break;
    }
    if (it >= 60) throw CalibrationError("calibrate_b: no bracket after 60 iterations");
    res.threshold = b;
    res.threshold_prob = p_of_z(b);
    res.achieved = achieved;
    res.iterations = it;
    res.converged = std::abs(achieved / target_ano_percent - 1.0) <= 2.0 * tol_rel;
    return res;
}

/// Calibrates eps for fractional sampling against a target ANO%; ANO% is
/// monotone increasing in eps.
template <ObservationModel M>
CalibrationResult calibrate_eps(double target_ano_percent, double a, const M& model,
                                const GeometricPrior& prior, std::int64_t n_trials,
                                double tol_rel = 0.03, std::uint64_t master_seed = 1,
                                const McOptions& opt = {}) {
    require(target_ano_percent > 0.0 && target_ano_percent < 100.0,
            "calibrate_eps: target must be in (0, 100)");
    auto eval = [&](double eps, int it) {
        PolicySpec pol = FractionalSamplingPolicy::from_log_odds(a, eps);
        MetricsEstimate m = estimate_metrics(pol, model, prior, n_trials,
                                             derive_seed(master_seed, static_cast<std::uint64_t>(it)), opt);
        return m.ano_percent();
    };
    double lo = 0.0, hi = 1.0;
    CalibrationResult res;
    res.target = target_ano_percent;
    double eps = std::min(1.0, target_ano_percent / 100.0 / (1.0 - prior.rho));
    for (int it = 1; it <= 60; ++it) {
        double achieved = eval(eps, it);
        res.threshold = eps;
        res.threshold_prob = eps;
        res.achieved = achieved;
        res.iterations = it;
        if (std::abs(achieved / target_ano_percent - 1.0) <= tol_rel) {
            res.converged = true;
            return res;
        }
        if (achieved < target_ano_percent)
            lo = eps;
        else
            hi = eps;
        eps = 0.5 * (lo + hi);
    }
    throw CalibrationError("calibrate_eps: no bracket after 60 iterations");
}

}  // namespace qcd
