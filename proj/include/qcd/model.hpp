#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>

#include "qcd/common.hpp"
#include "qcd/rng.hpp"

namespace qcd {

/// Geometric change-point law: P{G=0} = pi0, P{G=k} = (1-pi0) rho (1-rho)^{k-1}.
struct GeometricPrior {
    double rho;
    double pi0;

    explicit GeometricPrior(double rho_, double pi0_ = 0.0) : rho(rho_), pi0(pi0_) {
        require(rho > 0.0 && rho < 1.0, "GeometricPrior: rho must be in (0,1)");
        require(pi0 >= 0.0 && pi0 < 1.0, "GeometricPrior: pi0 must be in [0,1)");
    }

    double mean_change_time() const { return (1.0 - pi0) / rho; }

    /// |log(1-rho)|, the deterministic upward drift contributed by the prior.
    double log_drift() const { return -std::log1p(-rho); }
};

template <class M>
concept ObservationModel = requires(const M m, double x, Rng& g) {
    { m.log_lr(x) } -> std::convertible_to<double>;
    { m.kl_post_pre() } -> std::convertible_to<double>;
    { m.kl_pre_post() } -> std::convertible_to<double>;
    { m.density_pre(x) } -> std::convertible_to<double>;
    { m.density_post(x) } -> std::convertible_to<double>;
    { m.sample_pre(g) } -> std::convertible_to<double>;
    { m.sample_post(g) } -> std::convertible_to<double>;
    { m.sample_pre_at(std::uint64_t{}, std::uint64_t{}) } -> std::convertible_to<double>;
    { m.sample_post_at(std::uint64_t{}, std::uint64_t{}) } -> std::convertible_to<double>;
};

/// Pre-change N(0,1), post-change N(theta,1).
struct GaussianMeanShiftModel {
    double theta;

    explicit GaussianMeanShiftModel(double theta_) : theta(theta_) {
        require(theta > 0.0, "GaussianMeanShiftModel: theta must be positive");
    }

    /// log L(x) = log f1(x)/f0(x) = theta*x - theta^2/2.
    double log_lr(double x) const {
        if (!std::isfinite(x)) throw std::domain_error("log_lr: observation must be finite");
        return theta * x - 0.5 * theta * theta;
    }

    double kl_post_pre() const { return 0.5 * theta * theta; }
    double kl_pre_post() const { return 0.5 * theta * theta; }

    double density_pre(double x) const { return normal_pdf(x); }
    double density_post(double x) const { return normal_pdf(x, theta); }

    double sample_pre(Rng& g) const { return g.normal(); }
    double sample_post(Rng& g) const { return theta + g.normal(); }

    double sample_pre_at(std::uint64_t seed, std::uint64_t index) const {
        return indexed_normal(seed, index);
    }
    double sample_post_at(std::uint64_t seed, std::uint64_t index) const {
        return theta + indexed_normal(seed, index);
    }
};

static_assert(ObservationModel<GaussianMeanShiftModel>);

enum class Regime { pre, post };

/// Mean of Y = log L(X) + |log(1-rho)| under the given regime.
template <ObservationModel M>
double y_drift(const M& model, const GeometricPrior& prior, Regime regime) {
    double d = regime == Regime::post ? model.kl_post_pre() : -model.kl_pre_post();
    return d + prior.log_drift();
}

/// Draws the change time: 0 with probability pi0, else geometric on {1,2,...}.
inline std::int64_t sample_change_time(const GeometricPrior& prior, Rng& rng) {
    if (prior.pi0 > 0.0 && rng.uniform() < prior.pi0) return 0;
    double u = rng.uniform_pos();
    double k = std::floor(std::log(u) / std::log1p(-prior.rho));
    return 1 + static_cast<std::int64_t>(k);
}

/// One realization of the change process: a change time and the observation
/// stream X_1, X_2, ... with density f0 before the change index and f1 from it
/// onward. Observations are a pure function of (seed, index), so only the
/// samples a policy actually uses ever get generated.
template <ObservationModel M>
class Scenario {
public:
    static constexpr std::int64_t kNever = INT64_MAX;

    Scenario(const M& model, const GeometricPrior& prior, std::uint64_t seed)
        : model_(model), obs_seed_(derive_seed(seed, 2)) {
        Rng gamma_rng(derive_seed(seed, 1));
        gamma_ = sample_change_time(prior, gamma_rng);
    }

    /// Fixed change time; kNever gives an all-f0 stream (the P_infty regime).
    static Scenario with_change_time(const M& model, const GeometricPrior& prior,
                                     std::uint64_t seed, std::int64_t gamma) {
        Scenario s(model, prior, seed);
        s.gamma_ = gamma;
        return s;
    }

    std::int64_t change_time() const { return gamma_; }
    bool never_changes() const { return gamma_ == kNever; }

    double observation(std::int64_t index) const {
        auto idx = static_cast<std::uint64_t>(index);
        return index >= gamma_ ? model_.sample_post_at(obs_seed_, idx)
                               : model_.sample_pre_at(obs_seed_, idx);
    }

private:
    M model_;
    std::uint64_t obs_seed_;
    std::int64_t gamma_ = kNever;
};

}  // namespace qcd
