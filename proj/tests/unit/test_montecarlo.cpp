#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qcd/montecarlo.hpp"

using namespace qcd;

namespace {
const GaussianMeanShiftModel kModel075(0.75);
const GeometricPrior kPrior001(0.01);

PolicySpec gamma_ab(double a, double b) {
    return TwoThresholdPolicy{ThresholdPair::from_log_odds(a, b)};
}
}  // namespace

TEST_CASE("trial counters for a change at the first step", "[montecarlo]") {
    GaussianMeanShiftModel m(2.0);
    PolicySpec pol = ShiryaevPolicy::from_probability(0.99);
    double delay_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto sc = Scenario<GaussianMeanShiftModel>::with_change_time(m, kPrior001, seed, 1);
        TrialRecord r = run_scenario(pol, m, kPrior001, sc, derive_seed(seed, 3), 100000);
        REQUIRE(r.obs_before == 0);  // min(tau, gamma - 1) = 0
        REQUIRE(r.delay_plus < 25);
        delay_sum += static_cast<double>(r.delay_plus);
        REQUIRE(r.obs_after == r.tau);
        REQUIRE_FALSE(r.truncated);
        REQUIRE(r.one_minus_p_tau < 0.01);
    }
    CHECK(delay_sum / 50.0 < 10.0);  // single-digit typical delay
}

TEST_CASE("stopping needs at least two steps from an empty prior", "[montecarlo]") {
    // with A > rho the single skip from p0=0 cannot reach the stop region
    PolicySpec pol = ShiryaevPolicy::from_probability(0.5);
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        TrialRecord r = run_trial(pol, kModel075, kPrior001, seed, 100000);
        REQUIRE(r.tau >= 2);
    }
}

TEST_CASE("metrics are bit-identical across worker counts", "[montecarlo]") {
    PolicySpec pol = gamma_ab(4.0, -1.5);
    McOptions one;
    one.n_workers = 1;
    McOptions four;
    four.n_workers = 4;
    McOptions three;
    three.n_workers = 3;
    auto a = estimate_metrics(pol, kModel075, kPrior001, 20'000, 99, one);
    auto b = estimate_metrics(pol, kModel075, kPrior001, 20'000, 99, four);
    auto c = estimate_metrics(pol, kModel075, kPrior001, 20'000, 99, three);
    REQUIRE(a.add == b.add);
    REQUIRE(a.pfa == b.pfa);
    REQUIRE(a.ano == b.ano);
    REQUIRE(a.ano1 == b.ano1);
    REQUIRE(a.add == c.add);
    REQUIRE(a.pfa == c.pfa);
    REQUIRE(a.pfa_se == c.pfa_se);
}

TEST_CASE("soft and indicator PFA estimators agree", "[montecarlo]") {
    // configuration with PFA around 6e-3 so the indicator has signal
    PolicySpec pol = gamma_ab(4.6, -2.2);
    auto m = estimate_metrics(pol, kModel075, kPrior001, 60'000, 4242);
    double diff = std::abs(m.pfa - m.pfa_indicator);
    double se = std::hypot(m.pfa_se, m.pfa_indicator_se);
    CHECK(diff < 3.0 * se);
}

TEST_CASE("ANO is non-increasing in b and PFA does not move", "[montecarlo]") {
    double prev_ano = std::numeric_limits<double>::infinity();
    std::vector<double> pfas, ses;
    for (double b : {-2.2, -1.5, -0.85, 0.0, 0.85}) {
        auto m = estimate_metrics(gamma_ab(4.6, b), kModel075, kPrior001, 40'000,
                                  1000 + static_cast<std::uint64_t>(b * 100));
        CHECK(m.ano <= prev_ano + 3.0 * m.ano_se);
        prev_ano = m.ano;
        pfas.push_back(m.pfa);
        ses.push_back(m.pfa_se);
    }
    for (std::size_t i = 0; i < pfas.size(); ++i)
        for (std::size_t j = i + 1; j < pfas.size(); ++j)
            CHECK(std::abs(pfas[i] - pfas[j]) < 3.0 * std::hypot(ses[i], ses[j]));
}

TEST_CASE("fractional sampling at eps=1 reproduces shiryaev metrics", "[montecarlo]") {
    PolicySpec frac = FractionalSamplingPolicy::from_log_odds(4.0, 1.0);
    PolicySpec shir = ShiryaevPolicy::from_log_odds(4.0);
    auto a = estimate_metrics(frac, kModel075, kPrior001, 10'000, 7);
    auto b = estimate_metrics(shir, kModel075, kPrior001, 10'000, 7);
    CHECK(a.add == b.add);
    CHECK(a.pfa == b.pfa);
    CHECK(a.ano == b.ano);
}

TEST_CASE("truncation is counted, not dropped", "[montecarlo]") {
    PolicySpec pol = ShiryaevPolicy::from_log_odds(6.0);
    McOptions opt;
    opt.horizon_cap = 5;  // absurdly small on purpose
    auto m = estimate_metrics(pol, kModel075, kPrior001, 2000, 3, opt);
    CHECK(m.truncated_fraction > 0.99);
    CHECK(m.reliability_warning);
}

TEST_CASE("conditional and unconditional delay estimators", "[montecarlo]") {
    PolicySpec pol = gamma_ab(4.6, -2.2);
    auto m = estimate_metrics(pol, kModel075, kPrior001, 40'000, 11);
    // PFA ~ 6e-3, so the two differ by at most a small reweighting
    CHECK(m.add_unconditional <= m.add * 1.01 + 3 * m.add_se);
    CHECK(m.add_unconditional >= m.add * 0.97 - 3 * m.add_se);
    CHECK(m.n_detections + static_cast<std::int64_t>(std::lround(
                               m.pfa_indicator * static_cast<double>(m.n_trials))) == m.n_trials);
}

TEST_CASE("ano percent conversion", "[montecarlo]") {
    MetricsEstimate e;
    e.ano = 15.0;
    e.rho = 0.05;
    e.pi0 = 0.0;
    CHECK_THAT(e.ano_percent(), Catch::Matchers::WithinAbs(75.0, 1e-12));
}

TEST_CASE("PFA calibration hits its target from the analytical seed", "[montecarlo]") {
    GaussianMeanShiftModel m(1.0);
    double target = 1e-2;
    auto cal = calibrate_a(target, kNegInf, m, kPrior001, 40'000, 0.05, 5);
    REQUIRE(cal.converged);
    // e^{-a} bounds PFA above, so the calibrated a sits at or below -log(target)
    CHECK(cal.threshold <= -std::log(target) + 1e-9);
    // self-consistency: re-estimate at the returned threshold
    auto check = estimate_metrics(PolicySpec(ShiryaevPolicy::from_log_odds(cal.threshold)), m,
                                  kPrior001, 40'000, 999);
    CHECK(std::abs(check.pfa / target - 1.0) < 0.10);
    // PFA <= 1 - A always holds at the returned threshold
    CHECK(check.pfa <= 1.0 - cal.threshold_prob + 3.0 * check.pfa_se);
}

TEST_CASE("ANO percent calibration in b", "[montecarlo]") {
    auto cal = calibrate_b(50.0, 4.6, kModel075, kPrior001, 20'000, 0.05, 17);
    REQUIRE(cal.converged);
    auto m = estimate_metrics(gamma_ab(4.6, cal.threshold), kModel075, kPrior001, 40'000, 555);
    CHECK(std::abs(m.ano_percent() - 50.0) < 5.0);
}
