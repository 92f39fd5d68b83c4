#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/common.hpp"
#include "qcd/model.hpp"
#include "qcd/parallel.hpp"
#include "qcd/posterior.hpp"
#include "qcd/quadrature.hpp"

namespace qcd {

/// Lagrange multipliers of the relaxed problem: lambda_f prices a false
/// alarm, lambda_e prices one pre-change observation.
struct CostParams {
    double lambda_f = 0.0;
    double lambda_e = 0.0;
};

/// Value iteration output on a uniform belief grid. J is the optimal cost,
/// B0/B1 the continuation costs after a skip / take, d = B0 - B1.
struct ValueGrid {
    std::vector<double> p;
    std::vector<double> J;
    std::vector<double> B0;
    std::vector<double> B1;
    std::vector<double> d;
    CostParams costs;
    int iterations_run = 0;
    double sup_norm_delta = 0.0;
    bool converged = false;

    std::size_t size() const { return p.size(); }

    double interp(const std::vector<double>& f, double x) const {
        if (x <= 0.0) return f.front();
        if (x >= 1.0) return f.back();
        double t = x * static_cast<double>(p.size() - 1);
        auto i = static_cast<std::size_t>(t);
        if (i >= p.size() - 1) i = p.size() - 2;
        double frac = t - static_cast<double>(i);
        return f[i] + frac * (f[i + 1] - f[i]);
    }

    /// Cost of continuing from belief x under the optimal action choice.
    double continuation_cost(double x) const {
        return x + std::min(interp(B0, x), costs.lambda_e * (1.0 - x) + interp(B1, x));
    }

    bool stop_at(double x) const { return costs.lambda_f * (1.0 - x) <= continuation_cost(x); }

    bool take_at(double x) const {
        return interp(d, x) >= costs.lambda_e * (1.0 - x);
    }
};

struct ValueIterationOptions {
    int grid_size = 2000;
    int max_iters = 1500;
    int quad_nodes = 129;
    double tol = 1e-9;
    int n_workers = 0;  // 0 = hardware concurrency
};

/// Fixed-point iteration of
///   J(p) = min{ lambda_f (1-p), p + min[ B0(p), lambda_e (1-p) + B1(p) ] }
/// with B0(p) = J(phi_skip(p)) by linear interpolation and
/// B1(p) = E[J(phi_take(X,p))] by Gauss-Legendre quadrature under the
/// one-step predictive mixture (1-q) f0 + q f1, q = phi_skip(p).
/// Sweeps are synchronous (Jacobi); each point reads only the previous sweep,
/// so the result is independent of evaluation order and worker count.
template <ObservationModel M>
ValueGrid value_iterate(const M& model, const GeometricPrior& prior, CostParams costs,
                        const ValueIterationOptions& opt = {}) {
    require(opt.grid_size >= 64, "value_iterate: grid_size must be at least 64");
    require(opt.max_iters >= 1, "value_iterate: max_iters must be at least 1");
    require(opt.quad_nodes >= 16, "value_iterate: quad_nodes must be at least 16");
    require(costs.lambda_f >= 0.0 && std::isfinite(costs.lambda_f), "lambda_f must be finite and >= 0");
    require(costs.lambda_e >= 0.0 && std::isfinite(costs.lambda_e), "lambda_e must be finite and >= 0");

    const auto m = static_cast<std::size_t>(opt.grid_size);
    const auto qn = static_cast<std::size_t>(opt.quad_nodes);

    ValueGrid g;
    g.costs = costs;
    g.p.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        g.p[i] = static_cast<double>(i) / static_cast<double>(m - 1);

    // Transition structure is iteration-invariant: precompute, for every grid
    // point, the skip target and the quadrature targets as (cell, fraction)
    // interpolation coordinates plus the mixture weights.
    const double half_width = 8.0;
    const double center = 0.5 * model.theta;  // symmetry point of the Gaussian pair
    Quadrature quad = gauss_legendre(opt.quad_nodes, center - half_width, center + half_width);

    std::vector<std::int32_t> skip_cell(m);
    std::vector<double> skip_frac(m);
    std::vector<std::int32_t> take_cell(m * qn);
    std::vector<double> take_frac(m * qn);
    std::vector<double> take_weight(m * qn);

    auto coords = [&](double x, std::int32_t& cell, double& frac) {
        double t = std::clamp(x, 0.0, 1.0) * static_cast<double>(m - 1);
        auto i = static_cast<std::size_t>(t);
        if (i >= m - 1) i = m - 2;
        cell = static_cast<std::int32_t>(i);
        frac = t - static_cast<double>(i);
    };

    for (std::size_t i = 0; i < m; ++i) {
        double q = phi_skip(g.p[i], prior.rho);
        coords(q, skip_cell[i], skip_frac[i]);
        for (std::size_t j = 0; j < qn; ++j) {
            double x = quad.nodes[j];
            double lr = std::exp(model.log_lr(x));
            double pp = q >= 1.0 ? 1.0 : q * lr / (q * lr + (1.0 - q));
            coords(pp, take_cell[i * qn + j], take_frac[i * qn + j]);
            double mixture = (1.0 - q) * model.density_pre(x) + q * model.density_post(x);
            take_weight[i * qn + j] = quad.weights[j] * mixture;
        }
    }

    std::vector<double> J(m, 0.0), Jn(m, 0.0), B0(m, 0.0), B1(m, 0.0);

    auto sweep_row = [&](std::size_t i, const std::vector<double>& src) {
        const double* f = src.data();
        double b0 = f[skip_cell[i]] +
                    skip_frac[i] * (f[skip_cell[i] + 1] - f[skip_cell[i]]);
        double b1 = 0.0;
        const std::int32_t* cell = take_cell.data() + i * qn;
        const double* frac = take_frac.data() + i * qn;
        const double* wt = take_weight.data() + i * qn;
        for (std::size_t j = 0; j < qn; ++j) {
            double v = f[cell[j]] + frac[j] * (f[cell[j] + 1] - f[cell[j]]);
            b1 += wt[j] * v;
        }
        B0[i] = b0;
        B1[i] = b1;
        double pi = g.p[i];
        double cont = pi + std::min(b0, costs.lambda_e * (1.0 - pi) + b1);
        Jn[i] = std::min(costs.lambda_f * (1.0 - pi), cont);
    };

    const std::size_t chunk = 256;
    const auto n_chunks = static_cast<std::int64_t>((m + chunk - 1) / chunk);
    double delta = kPosInf;
    int it = 0;
    for (; it < opt.max_iters; ++it) {
        parallel_chunks(n_chunks, opt.n_workers, [&](std::int64_t c) {
            std::size_t lo = static_cast<std::size_t>(c) * chunk;
            std::size_t hi = std::min(lo + chunk, m);
            for (std::size_t i = lo; i < hi; ++i) sweep_row(i, J);
        });
        delta = 0.0;
        for (std::size_t i = 0; i < m; ++i) delta = std::max(delta, std::abs(Jn[i] - J[i]));
        J.swap(Jn);
        if (delta < opt.tol) {
            ++it;
            break;
        }
    }

    // One more component pass against the final J so B0/B1/d are consistent.
    parallel_chunks(n_chunks, opt.n_workers, [&](std::int64_t c) {
        std::size_t lo = static_cast<std::size_t>(c) * chunk;
        std::size_t hi = std::min(lo + chunk, m);
        for (std::size_t i = lo; i < hi; ++i) sweep_row(i, J);
    });

    g.J = std::move(J);
    g.B0 = std::move(B0);
    g.B1 = std::move(B1);
    g.d.resize(m);
    for (std::size_t i = 0; i < m; ++i) g.d[i] = g.B0[i] - g.B1[i];
    g.iterations_run = it;
    g.sup_norm_delta = delta;
    g.converged = delta < opt.tol;
    return g;
}

enum class PolicyClass { TwoThreshold, MultiRegion };

/// Threshold structure read off a solved grid. take_region_boundaries are the
/// sign changes of d(p) - lambda_e (1-p) below the stop threshold; crossings
/// above A are kept separately (the upper intersection C can exceed A).
struct PolicyStructure {
    double stop_threshold_A = 0.0;
    double stop_cell_width = 0.0;  // extraction uncertainty
    std::vector<double> take_region_boundaries;
    std::vector<double> all_crossings;
    double B = 0.0;
    double C = std::numeric_limits<double>::quiet_NaN();
    PolicyClass classification = PolicyClass::TwoThreshold;
};

struct StructureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline PolicyStructure extract_structure(const ValueGrid& g) {
    const auto m = g.size();
    require(m >= 2, "extract_structure: grid too small");
    const CostParams& costs = g.costs;

    // Stop region: smallest p with lambda_f (1-p) <= p + A_J(p).
    std::size_t first_stop = m;
    for (std::size_t i = 0; i < m; ++i) {
        double cont = g.p[i] + std::min(g.B0[i], costs.lambda_e * (1.0 - g.p[i]) + g.B1[i]);
        if (costs.lambda_f * (1.0 - g.p[i]) <= cont) {
            first_stop = i;
            break;
        }
    }
    if (first_stop == m)
        throw StructureError("extract_structure: no stop region found on the grid");

    PolicyStructure s;
    double cell = g.p[1] - g.p[0];
    s.stop_cell_width = cell;
    s.stop_threshold_A = first_stop == 0 ? 0.0 : 0.5 * (g.p[first_stop - 1] + g.p[first_stop]);

    // Crossings of d(p) = lambda_e (1-p). The last grid cell is excluded:
    // both sides vanish at p = 1 and their difference there is pure noise.
    auto gfun = [&](std::size_t i) { return g.d[i] - costs.lambda_e * (1.0 - g.p[i]); };
    for (std::size_t i = 0; i + 2 < m; ++i) {
        double gi = gfun(i), gj = gfun(i + 1);
        if ((gi < 0.0 && gj >= 0.0) || (gi >= 0.0 && gj < 0.0)) {
            double t = gi / (gi - gj);
            double root = g.p[i] + t * cell;
            s.all_crossings.push_back(root);
            if (root < s.stop_threshold_A) s.take_region_boundaries.push_back(root);
        }
    }

    bool take_at_zero = gfun(0) >= 0.0;
    s.B = take_at_zero ? 0.0
                       : (s.take_region_boundaries.empty() ? s.stop_threshold_A
                                                           : s.take_region_boundaries.front());
    if (s.all_crossings.size() >= 2) s.C = s.all_crossings[1];

    // Two-threshold means the take region below A is the single interval [B, A).
    std::size_t below = s.take_region_boundaries.size();
    bool two = take_at_zero ? below == 0 : below == 1;
    s.classification = two ? PolicyClass::TwoThreshold : PolicyClass::MultiRegion;
    return s;
}

/// Decision table backed by a solved grid; decisions are interpolated lookups.
struct TabulatedDpPolicy {
    std::shared_ptr<const ValueGrid> grid;
};

/// Writes p, J, B0, B1, d, lambda_e_line, stop_cost rows; enough to re-plot
/// the value-function and threshold pictures.
inline void write_grid_csv(const ValueGrid& g, std::ostream& os) {
    os << "p,J,B0,B1,d,lambda_e_line,stop_cost\n";
    char buf[256];
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      g.p[i], g.J[i], g.B0[i], g.B1[i], g.d[i],
                      g.costs.lambda_e * (1.0 - g.p[i]), g.costs.lambda_f * (1.0 - g.p[i]));
        os << buf;
    }
}

}  // namespace qcd
