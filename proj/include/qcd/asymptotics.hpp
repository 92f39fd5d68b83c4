#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/common.hpp"
#include "qcd/model.hpp"
#include "qcd/parallel.hpp"
#include "qcd/posterior.hpp"
#include "qcd/rng.hpp"
#include "qcd/stats.hpp"

namespace qcd {

/// Empirical law of the overshoot of the random walk sum(Y_k),
/// Y_k = log L(X_k) + |log(1-rho)| with X ~ f1, over a high wall.
/// r_bar is its mean, laplace_at_one estimates E[e^{-overshoot}].
struct OvershootDistribution {
    std::vector<double> samples;
    double r_bar = 0.0, r_bar_se = 0.0;
    double laplace_at_one = 0.0, laplace_se = 0.0;
    std::int64_t n_crossings = 0;
    double wall_height = 0.0;

    /// Mean and standard error of g(X) over the stored overshoot samples.
    template <class G>
    std::pair<double, double> mean_of(G&& g) const {
        Accumulator acc;
        for (double x : samples) acc.add(g(x));
        return {acc.mean(), acc.se()};
    }
};

template <ObservationModel M>
OvershootDistribution estimate_overshoot(const M& model, const GeometricPrior& prior,
                                         std::int64_t n_crossings, double wall_height = 0.0,
                                         std::uint64_t seed = 1, int n_workers = 0) {
    double drift = y_drift(model, prior, Regime::post);
    if (!(drift > 0.0))
        throw std::domain_error("estimate_overshoot: post-change drift of Y must be positive");
    if (wall_height <= 0.0) wall_height = 50.0 * drift;

    const std::int64_t chunk = 4096;
    std::int64_t n_chunks = (n_crossings + chunk - 1) / chunk;
    std::vector<std::vector<double>> parts(static_cast<std::size_t>(n_chunks));
    const double c = prior.log_drift();

    parallel_chunks(n_chunks, n_workers, [&](std::int64_t cidx) {
        std::int64_t lo = cidx * chunk, hi = std::min(lo + chunk, n_crossings);
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(hi - lo));
        for (std::int64_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            double s = 0.0;
            while (s <= wall_height) s += model.log_lr(model.sample_post(rng)) + c;
            out.push_back(s - wall_height);
        }
        parts[static_cast<std::size_t>(cidx)] = std::move(out);
    });

    OvershootDistribution d;
    d.samples.reserve(static_cast<std::size_t>(n_crossings));
    for (auto& part : parts) d.samples.insert(d.samples.end(), part.begin(), part.end());
    d.n_crossings = n_crossings;
    d.wall_height = wall_height;

    Accumulator mean_acc, lap_acc;
    for (double x : d.samples) {
        mean_acc.add(x);
        lap_acc.add(std::exp(-x));
    }
    d.r_bar = mean_acc.mean();
    d.r_bar_se = mean_acc.se();
    d.laplace_at_one = lap_acc.mean();
    d.laplace_se = lap_acc.se();
    return d;
}

/// PFA(gamma(a,b)) ~ e^{-a} E[e^{-overshoot}]; carries no dependence on b.
inline double pfa_approx(double a, const OvershootDistribution& overshoot) {
    require(a > 0.0, "pfa_approx: a must be positive");
    return std::exp(-a) * overshoot.laplace_at_one;
}

/// Monte Carlo mean of the a.s. limit of the slowly changing part of Z_n:
///   eta(z0) = log[ e^{z0} + sum_k rho (1-rho)^k prod_{i<=k} f0(X_i)/f1(X_i) ]
/// under X ~ f1. Terms decay geometrically once the likelihood walk escapes,
/// so summation stops when the running term is negligible relative to the
/// partial sum (and in any case at truncation_k).
struct EtaEstimate {
    double z0 = 0.0;
    double mean = 0.0;
    double se = 0.0;
    std::int64_t n_paths = 0;
    std::int64_t truncation_k = 0;
};

template <ObservationModel M>
EtaEstimate estimate_eta(const M& model, const GeometricPrior& prior, double z0,
                         std::int64_t n_paths, std::int64_t truncation_k = 0,
                         std::uint64_t seed = 1, int n_workers = 0) {
    if (truncation_k <= 0) {
        // geometric tail weight (1-rho)^k below 1e-6, but at least enough
        // steps for the likelihood walk to leave the relevant range
        truncation_k = static_cast<std::int64_t>(std::ceil(-6.0 * std::log(10.0) / std::log1p(-prior.rho)));
        truncation_k = std::max<std::int64_t>(truncation_k, 64);
    }
    const double ez0 = z0 == kNegInf ? 0.0 : std::exp(z0);
    const std::int64_t chunk = 2048;
    std::int64_t n_chunks = (n_paths + chunk - 1) / chunk;
    std::vector<Accumulator> parts(static_cast<std::size_t>(n_chunks));

    parallel_chunks(n_chunks, n_workers, [&](std::int64_t cidx) {
        Accumulator acc;
        std::int64_t lo = cidx * chunk, hi = std::min(lo + chunk, n_paths);
        for (std::int64_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            double total = ez0 + prior.rho;  // k = 0 term
            double term = prior.rho;
            int quiet = 0;
            for (std::int64_t k = 1; k <= truncation_k && quiet < 20; ++k) {
                term *= (1.0 - prior.rho) * std::exp(-model.log_lr(model.sample_post(rng)));
                total += term;
                quiet = term < 1e-12 * total ? quiet + 1 : 0;
            }
            acc.add(std::log(total));
        }
        parts[static_cast<std::size_t>(cidx)] = acc;
    });

    Accumulator total = pairwise_combine(std::move(parts));
    return EtaEstimate{z0, total.mean(), total.se(), n_paths, truncation_k};
}

/// First-order delay: a / (D(f1,f0) + |log(1-rho)|).
template <ObservationModel M>
double add_first_order(double a, const M& model, const GeometricPrior& prior) {
    require(a >= 0.0, "add_first_order: a must be nonnegative");
    return a / (model.kl_post_pre() + prior.log_drift());
}

/// Shared second-order passage form (a - E[eta] + r_bar) / (D + |log(1-rho)|).
template <ObservationModel M>
double second_order_passage(double a, double eta_mean, double r_bar, const M& model,
                            const GeometricPrior& prior) {
    return (a - eta_mean + r_bar) / (model.kl_post_pre() + prior.log_drift());
}

/// Second-order delay of the always-observing baseline, with eta at -inf.
template <ObservationModel M>
double add_shiryaev(double a, const M& model, const GeometricPrior& prior, double eta_minus_inf,
                    double r_bar) {
    return second_order_passage(a, eta_minus_inf, r_bar, model, prior);
}

/// E1[nu_b]: passage time from b to a of the always-observing recursion, with
/// eta at b. Doubles as the ANO1 approximation.
template <ObservationModel M>
double e1_nu_b(double a, double b, const M& model, const GeometricPrior& prior, double eta_at_b,
               double r_bar) {
    require(std::isfinite(b), "e1_nu_b: b must be finite");
    return second_order_passage(a, eta_at_b, r_bar, model, prior);
}

/// Mean duration of one excursion below b (ladder approximation):
///   (r_bar + log(1 + rho e^{-b})) / (D - |log(1-rho)|).
/// Needs the taken-observation walk to drift down pre-change, D > |log(1-rho)|.
template <ObservationModel M>
double expected_lambda_hat(double b, const M& model, const GeometricPrior& prior, double r_bar) {
    double denom = model.kl_post_pre() - prior.log_drift();
    if (!(denom > 0.0))
        throw std::domain_error(
            "expected_lambda_hat: drift condition D(f1,f0) > |log(1-rho)| violated");
    return (r_bar + std::log1p(prior.rho * std::exp(-b))) / denom;
}

/// Mean climb time back to b after an excursion, integrating the closed-form
/// skip time over the empirical undershoot law:
///   E[ (log(1+e^b) - log(1+e^{b-X})) / |log(1-rho)| ],  X ~ overshoot law.
inline double expected_t_reentry(double b, const GeometricPrior& prior,
                                 const OvershootDistribution& overshoot) {
    double c = prior.log_drift();
    auto [m, se] = overshoot.mean_of(
        [&](double x) { return (log1pexp(b) - log1pexp(b - x)) / c; });
    (void)se;
    return m;
}

struct AnoApprox {
    double value = 0.0;
    double pre_binomial_value = 0.0;  // without the binomial expansion step
    double e_lambda_hat = 0.0;
    double e_t_reentry = 0.0;
};

/// Pre-change observation count:
///   ANO ~ rho^{-1} E[lambda_hat] / (E[lambda_hat] + E[t(Z,b)]) * 1/(1+e^b).
template <ObservationModel M>
AnoApprox ano_approx(double b, const M& model, const GeometricPrior& prior, double r_bar,
                     const OvershootDistribution& overshoot) {
    require(std::isfinite(b), "ano_approx: b must be finite");
    AnoApprox r;
    r.e_lambda_hat = expected_lambda_hat(b, model, prior, r_bar);
    r.e_t_reentry = expected_t_reentry(b, prior, overshoot);
    double occupancy = 1.0 / (1.0 + std::exp(b));
    r.value = (1.0 / prior.rho) * r.e_lambda_hat / (r.e_lambda_hat + r.e_t_reentry) * occupancy;
    double cycle = r.e_lambda_hat + r.e_t_reentry;
    double p_change_in_cycle = -std::expm1(cycle * std::log1p(-prior.rho));
    r.pre_binomial_value = r.e_lambda_hat / p_change_in_cycle * occupancy;
    return r;
}

struct P1BelowB {
    double value = 0.0;
    double se = 0.0;
    std::int64_t n_paths = 0;
};

/// P1(Z_lambda < b) via the likelihood-ratio identity: simulate the excursion
/// from b under f0 with a = inf (taking at every step until Z drops below b)
/// and average the accumulated ratio prod f1(X)/f0(X).
template <ObservationModel M>
P1BelowB p1_below_b(const M& model, const GeometricPrior& prior, double b, std::int64_t n_paths,
                    std::uint64_t seed = 1, int n_workers = 0) {
    require(std::isfinite(b), "p1_below_b: b must be finite");
    if (!(model.kl_pre_post() > prior.log_drift()))
        throw std::domain_error("p1_below_b: statistic must drift down under f0");
    const std::int64_t chunk = 4096;
    std::int64_t n_chunks = (n_paths + chunk - 1) / chunk;
    std::vector<Accumulator> parts(static_cast<std::size_t>(n_chunks));
    parallel_chunks(n_chunks, n_workers, [&](std::int64_t cidx) {
        Accumulator acc;
        std::int64_t lo = cidx * chunk, hi = std::min(lo + chunk, n_paths);
        for (std::int64_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            double z = b, loglr = 0.0;
            while (z >= b) {
                double x = model.sample_pre(rng);
                z = z_take(x, z, prior.rho, model);
                loglr += model.log_lr(x);
            }
            acc.add(std::exp(loglr));
        }
        parts[static_cast<std::size_t>(cidx)] = acc;
    });
    Accumulator total = pairwise_combine(std::move(parts));
    return P1BelowB{total.mean(), total.se(), n_paths};
}

/// Everything the delay assembly needs; NaN marks a missing entry.
struct DelayComponents {
    double r_bar = std::numeric_limits<double>::quiet_NaN();
    double eta_b = std::numeric_limits<double>::quiet_NaN();
    double p1_below = std::numeric_limits<double>::quiet_NaN();
    double e_lambda_hat = std::numeric_limits<double>::quiet_NaN();
    double e_t_reentry = std::numeric_limits<double>::quiet_NaN();
};

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_components(const DelayComponents& c, bool need_cycle_terms) {
    std::string missing;
    auto chk = [&](double v, const char* name) {
        if (std::isnan(v)) missing += missing.empty() ? name : std::string(", ") + name;
    };
    chk(c.r_bar, "r_bar");
    chk(c.eta_b, "eta_b");
    if (need_cycle_terms) {
        chk(c.p1_below, "p1_below");
        chk(c.e_lambda_hat, "e_lambda_hat");
        chk(c.e_t_reentry, "e_t_reentry");
    }
    if (!missing.empty()) throw AssemblyError("delay assembly: missing components: " + missing);
}

/// Geometric-cycle decomposition of the passage from b to a:
///   ADDs = E1[lambda | up] + (E1[lambda | down] + t(b - r_bar, b)) P/(1-P),
/// with the up-exit length approximated by the second-order passage form and
/// the down-exit length by the ladder approximation.
template <ObservationModel M>
double adds_cycle(double a, double b, const M& model, const GeometricPrior& prior,
                  const DelayComponents& comp) {
    check_components(comp, true);
    double climb = second_order_passage(a, comp.eta_b, comp.r_bar, model, prior);
    double fail_len = comp.e_lambda_hat;
    double reentry = t_closed_form(b - comp.r_bar, b, prior.rho);
    double p = comp.p1_below;
    return climb + (fail_len + reentry) * p / (1.0 - p);
}

/// Mean of the change-time law conditioned on {G <= t}.
inline double truncated_geometric_mean(std::int64_t t, double rho) {
    if (t <= 0) return 0.0;
    double q = 1.0 - rho;
    double qt = std::pow(q, static_cast<double>(t));
    double p_le = 1.0 - qt;
    double mass = (1.0 - qt * (1.0 + rho * static_cast<double>(t))) / rho;
    return mass / p_le;
}

/// Refined conditional delay estimate. Conditions on where the change lands:
/// with probability P_b the statistic is already in the take region and only
/// the climb to a remains; otherwise it first has to climb back to b (with a
/// truncated-geometric credit for time already elapsed) and then runs the
/// cycle decomposition above.
template <ObservationModel M>
double add_new(double a, double b, const M& model, const GeometricPrior& prior,
               const DelayComponents& comp) {
    check_components(comp, true);
    double climb = second_order_passage(a, comp.eta_b, comp.r_bar, model, prior);
    double adds = adds_cycle(a, b, model, prior, comp);

    double occupancy = 1.0 / (1.0 + std::exp(b));       // P(G > first climb to b)
    double cycle_up = comp.e_lambda_hat / (comp.e_lambda_hat + comp.e_t_reentry);
    double p_b = occupancy * cycle_up;                   // change lands above b

    // Change lands below b: split by whether the first climb to b was over.
    double w_cycle = occupancy * (1.0 - cycle_up);
    double w_first = 1.0 - occupancy;
    std::int64_t t_re = t_exact(b - comp.r_bar, b, prior.rho);
    std::int64_t t_first = t_exact(kNegInf, b, prior.rho);
    double rem_cycle = static_cast<double>(t_re) - truncated_geometric_mean(t_re, prior.rho);
    double rem_first = static_cast<double>(t_first) - truncated_geometric_mean(t_first, prior.rho);
    double below_term = w_cycle * rem_cycle + w_first * rem_first;

    return p_b * climb + (1.0 - p_b) * adds + below_term;
}

struct ApproxOptions {
    std::int64_t n_crossings = 1'000'000;
    double wall_mult = 50.0;
    std::int64_t n_eta_paths = 1'000'000;
    std::int64_t n_p1_paths = 1'000'000;
    std::uint64_t seed = 1;
    int n_workers = 0;
};

/// All analytical approximations for one (model, prior, a, b) configuration.
struct ApproxReport {
    double a = 0.0, b = 0.0;
    double pfa_approx = 0.0;
    double add_first_order = 0.0;
    double add_shiryaev = 0.0;   // baseline delay, eta(-inf)
    double e1_nu_b = 0.0;        // gamma(a,b) delay and ANO1, eta(b)
    double ano1_approx = 0.0;
    double ano_approx = 0.0;
    double ano_pre_binomial = 0.0;
    double adds_cycle = 0.0;
    double add_new = 0.0;
    double r_bar = 0.0, r_bar_se = 0.0;
    double laplace_at_one = 0.0, laplace_se = 0.0;
    double eta_b_mean = 0.0, eta_b_se = 0.0;
    double eta_minus_inf_mean = 0.0, eta_minus_inf_se = 0.0;
    double lambda_hat_mean = 0.0;
    double t_zhat_b_mean = 0.0;
    double p1_below_b = 0.0, p1_below_b_se = 0.0;
    double p_b = 0.0;
};

template <ObservationModel M>
ApproxReport approx_report(const M& model, const GeometricPrior& prior, double a, double b,
                           const ApproxOptions& opt = {}) {
    require(std::isfinite(b), "approx_report: b must be finite");
    ApproxReport r;
    r.a = a;
    r.b = b;

    OvershootDistribution os = estimate_overshoot(
        model, prior, opt.n_crossings, opt.wall_mult * y_drift(model, prior, Regime::post),
        derive_seed(opt.seed, 11), opt.n_workers);
    EtaEstimate eta_b = estimate_eta(model, prior, b, opt.n_eta_paths, 0,
                                     derive_seed(opt.seed, 12), opt.n_workers);
    EtaEstimate eta_inf = estimate_eta(model, prior, kNegInf, opt.n_eta_paths, 0,
                                       derive_seed(opt.seed, 13), opt.n_workers);
    P1BelowB p1 = p1_below_b(model, prior, b, opt.n_p1_paths, derive_seed(opt.seed, 14),
                             opt.n_workers);

    r.r_bar = os.r_bar;
    r.r_bar_se = os.r_bar_se;
    r.laplace_at_one = os.laplace_at_one;
    r.laplace_se = os.laplace_se;
    r.eta_b_mean = eta_b.mean;
    r.eta_b_se = eta_b.se;
    r.eta_minus_inf_mean = eta_inf.mean;
    r.eta_minus_inf_se = eta_inf.se;
    r.p1_below_b = p1.value;
    r.p1_below_b_se = p1.se;

    r.pfa_approx = pfa_approx(a, os);
    r.add_first_order = add_first_order(a, model, prior);
    r.add_shiryaev = add_shiryaev(a, model, prior, eta_inf.mean, os.r_bar);
    r.e1_nu_b = e1_nu_b(a, b, model, prior, eta_b.mean, os.r_bar);
    r.ano1_approx = r.e1_nu_b;

    AnoApprox ano = ano_approx(b, model, prior, os.r_bar, os);
    r.ano_approx = ano.value;
    r.ano_pre_binomial = ano.pre_binomial_value;
    r.lambda_hat_mean = ano.e_lambda_hat;
    r.t_zhat_b_mean = ano.e_t_reentry;

    DelayComponents comp{os.r_bar, eta_b.mean, p1.value, ano.e_lambda_hat, ano.e_t_reentry};
    r.adds_cycle = adds_cycle(a, b, model, prior, comp);
    r.add_new = add_new(a, b, model, prior, comp);
    double occupancy = 1.0 / (1.0 + std::exp(b));
    r.p_b = occupancy * ano.e_lambda_hat / (ano.e_lambda_hat + ano.e_t_reentry);
    return r;
}

}  // namespace qcd
