#pragma once

#include <cstdint>
#include <vector>

#include "qcd/montecarlo.hpp"

namespace qcd {

/// Generalized PFA calibration over any a -> policy mapping.
template <ObservationModel M, class Factory>
CalibrationResult calibrate_a_for(double target_pfa, Factory&& make_policy, const M& model,
                                  const GeometricPrior& prior, std::int64_t n_trials,
                                  double tol_rel, std::uint64_t master_seed,
                                  const McOptions& opt = {}) {
    require(target_pfa > 0.0 && target_pfa < 0.5, "calibrate_a_for: target must be in (0, 0.5)");
    double a = -std::log(target_pfa);
    double lo = 0.0, hi = kPosInf;
    CalibrationResult res;
    res.target = target_pfa;
    for (int it = 1; it <= 60; ++it) {
        MetricsEstimate m = estimate_metrics(make_policy(a), model, prior, n_trials,
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
        if (next <= lo || next >= hi) next = std::isfinite(hi) ? 0.5 * (lo + hi) : lo + 1.0;
        a = next;
    }
    throw CalibrationError("calibrate_a_for: no bracket after 60 iterations");
}

struct TradeoffPoint {
    double rho = 0.0;
    double ano_percent_target = 0.0;
    double a = 0.0, b = 0.0;
    double add = 0.0, add_se = 0.0;
    double pfa = 0.0, pfa_se = 0.0;
    double ano_percent = 0.0;
    double add_shiryaev = 0.0, add_shiryaev_se = 0.0;
    bool calibrated = true;
};

/// For each rho: pins a on the always-observe rule at the PFA target (PFA is
/// not a function of b), then raises b to each ANO% target and reports the
/// delay next to the always-observe delay at the same false alarm level.
template <ObservationModel M>
std::vector<TradeoffPoint> tradeoff_curve(const M& model, const std::vector<double>& rho_list,
                                          double pfa_target,
                                          const std::vector<double>& ano_percent_list,
                                          std::int64_t n_trials, std::uint64_t master_seed = 1,
                                          const McOptions& opt = {}) {
    std::vector<TradeoffPoint> out;
    std::int64_t n_cal = std::max<std::int64_t>(20'000, n_trials / 4);
    for (double rho : rho_list) {
        GeometricPrior prior(rho);
        auto cal_a = calibrate_a(pfa_target, kNegInf, model, prior, n_cal, 0.03,
                                 derive_seed(master_seed, 11), opt);
        PolicySpec shir = ShiryaevPolicy::from_log_odds(cal_a.threshold);
        auto base = estimate_metrics(shir, model, prior, n_trials, derive_seed(master_seed, 12), opt);
        for (double target : ano_percent_list) {
            TradeoffPoint pt;
            pt.rho = rho;
            pt.ano_percent_target = target;
            pt.a = cal_a.threshold;
            pt.add_shiryaev = base.add;
            pt.add_shiryaev_se = base.add_se;
            auto cal_b = calibrate_b(target, cal_a.threshold, model, prior, n_cal, 0.04,
                                     derive_seed(master_seed, 13), opt);
            pt.b = cal_b.threshold;
            pt.calibrated = cal_b.converged;
            PolicySpec pol = cal_b.threshold == kNegInf
                                 ? shir
                                 : PolicySpec(TwoThresholdPolicy{
                                       ThresholdPair::from_log_odds(cal_a.threshold, cal_b.threshold)});
            auto m = estimate_metrics(pol, model, prior, n_trials, derive_seed(master_seed, 14), opt);
            pt.add = m.add;
            pt.add_se = m.add_se;
            pt.pfa = m.pfa;
            pt.pfa_se = m.pfa_se;
            pt.ano_percent = m.ano_percent();
            out.push_back(pt);
        }
    }
    return out;
}

struct FractionalComparisonPoint {
    double rho = 0.0;
    double ano_percent_target = 0.0;
    double a = 0.0, b = 0.0;
    double a_frac = 0.0, eps = 0.0;
    double add_two_threshold = 0.0, add_two_threshold_se = 0.0;
    double add_fractional = 0.0, add_fractional_se = 0.0;
    double add_shiryaev = 0.0, add_shiryaev_se = 0.0;
    double pfa_two_threshold = 0.0, pfa_fractional = 0.0;
    double ano_percent_two_threshold = 0.0, ano_percent_fractional = 0.0;
};

/// Calibrates the two-threshold rule and the fractional-sampling baseline to
/// the same PFA and ANO% for each rho, and reports all three delays.
template <ObservationModel M>
std::vector<FractionalComparisonPoint> compare_fractional(
    const M& model, const std::vector<double>& rho_list, double pfa_target, double ano_percent,
    std::int64_t n_trials, std::uint64_t master_seed = 1, const McOptions& opt = {}) {
    std::vector<FractionalComparisonPoint> out;
    std::int64_t n_cal = std::max<std::int64_t>(20'000, n_trials / 4);
    for (double rho : rho_list) {
        GeometricPrior prior(rho);
        FractionalComparisonPoint pt;
        pt.rho = rho;
        pt.ano_percent_target = ano_percent;

        auto cal_a = calibrate_a(pfa_target, kNegInf, model, prior, n_cal, 0.03,
                                 derive_seed(master_seed, 21), opt);
        pt.a = cal_a.threshold;
        auto base = estimate_metrics(PolicySpec(ShiryaevPolicy::from_log_odds(cal_a.threshold)),
                                     model, prior, n_trials, derive_seed(master_seed, 22), opt);
        pt.add_shiryaev = base.add;
        pt.add_shiryaev_se = base.add_se;

        auto cal_b = calibrate_b(ano_percent, cal_a.threshold, model, prior, n_cal, 0.04,
                                 derive_seed(master_seed, 23), opt);
        pt.b = cal_b.threshold;
        auto two = estimate_metrics(
            PolicySpec(TwoThresholdPolicy{ThresholdPair::from_log_odds(cal_a.threshold, cal_b.threshold)}),
            model, prior, n_trials, derive_seed(master_seed, 24), opt);
        pt.add_two_threshold = two.add;
        pt.add_two_threshold_se = two.add_se;
        pt.pfa_two_threshold = two.pfa;
        pt.ano_percent_two_threshold = two.ano_percent();

        // Fractional sampling: eps and its own a interact only weakly, so one
        // eps pass at the baseline a followed by one PFA recalibration is
        // enough at the calibration tolerances used here.
        double eps0 = std::min(1.0, ano_percent / 100.0 / (1.0 - rho));
        auto cal_af = calibrate_a_for(
            pfa_target, [&](double a) { return PolicySpec(FractionalSamplingPolicy::from_log_odds(a, eps0)); },
            model, prior, n_cal, 0.03, derive_seed(master_seed, 25), opt);
        auto cal_eps = calibrate_eps(ano_percent, cal_af.threshold, model, prior, n_cal, 0.04,
                                     derive_seed(master_seed, 26), opt);
        auto cal_af2 = calibrate_a_for(
            pfa_target,
            [&](double a) { return PolicySpec(FractionalSamplingPolicy::from_log_odds(a, cal_eps.threshold)); },
            model, prior, n_cal, 0.03, derive_seed(master_seed, 27), opt);
        pt.a_frac = cal_af2.threshold;
        pt.eps = cal_eps.threshold;
        auto frac = estimate_metrics(
            PolicySpec(FractionalSamplingPolicy::from_log_odds(cal_af2.threshold, cal_eps.threshold)),
            model, prior, n_trials, derive_seed(master_seed, 28), opt);
        pt.add_fractional = frac.add;
        pt.add_fractional_se = frac.add_se;
        pt.pfa_fractional = frac.pfa;
        pt.ano_percent_fractional = frac.ano_percent();
        out.push_back(pt);
    }
    return out;
}

}  // namespace qcd
