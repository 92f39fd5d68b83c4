#pragma once

// Reference benchmark suite: published operating characteristics of the
// two-threshold detector on the Gaussian mean-shift model, replicated here by
// running both the analytical approximations and the simulator at pinned
// tolerances. Each table runner returns per-cell pass/fail results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qcd/asymptotics.hpp"
#include "qcd/montecarlo.hpp"

namespace qcd::replication {

struct RunOptions {
    std::int64_t sim_trials_pfa = 1'000'000;   // PFA tables
    std::int64_t sim_trials_delay = 100'000;   // delay/observation tables
    std::int64_t crossings = 600'000;
    std::int64_t eta_paths = 150'000;
    std::int64_t p1_paths = 150'000;
    std::uint64_t seed = 20240601;
    int workers = 0;
};

struct Cell {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;  // relative unless abs_tol is set
    bool absolute = false;
    bool gated = true;       // ungated cells are informational
    bool pass = true;

    static Cell rel(std::string name, double value, double ref, double tol, bool gated = true) {
        Cell c{std::move(name), value, ref, tol, false, gated, true};
        c.pass = !gated || std::abs(value / ref - 1.0) <= tol;
        return c;
    }
    static Cell abs(std::string name, double value, double ref, double tol, bool gated = true) {
        Cell c{std::move(name), value, ref, tol, true, gated, true};
        c.pass = !gated || std::abs(value - ref) <= tol;
        return c;
    }
};

struct RowResult {
    std::string label;
    std::vector<Cell> cells;
    bool pass() const {
        for (const auto& c : cells)
            if (!c.pass) return false;
        return true;
    }
};

struct TableResult {
    std::string name;
    std::vector<RowResult> rows;
    bool pass() const {
        for (const auto& r : rows)
            if (!r.pass()) return false;
        return true;
    }
};

/// Shared Monte Carlo functionals, keyed by the model/prior pair so several
/// table rows can reuse one overshoot run.
class OracleCache {
public:
    explicit OracleCache(const RunOptions& opt) : opt_(opt) {}

    const OvershootDistribution& overshoot(double theta, double rho) {
        auto key = std::make_pair(theta, rho);
        auto it = overshoot_.find(key);
        if (it != overshoot_.end()) return it->second;
        GaussianMeanShiftModel model(theta);
        GeometricPrior prior(rho);
        auto os = estimate_overshoot(model, prior, opt_.crossings, 0.0,
                                     derive_seed(opt_.seed, 101), opt_.workers);
        return overshoot_.emplace(key, std::move(os)).first->second;
    }

    double eta(double theta, double rho, double z0) {
        auto key = std::make_tuple(theta, rho, z0);
        auto it = eta_.find(key);
        if (it != eta_.end()) return it->second;
        GaussianMeanShiftModel model(theta);
        GeometricPrior prior(rho);
        double v = estimate_eta(model, prior, z0, opt_.eta_paths, 0,
                                derive_seed(opt_.seed, 303), opt_.workers)
                       .mean;
        eta_.emplace(key, v);
        return v;
    }

    double p1_below(double theta, double rho, double b) {
        auto key = std::make_tuple(theta, rho, b);
        auto it = p1_.find(key);
        if (it != p1_.end()) return it->second;
        GaussianMeanShiftModel model(theta);
        GeometricPrior prior(rho);
        double v =
            p1_below_b(model, prior, b, opt_.p1_paths, derive_seed(opt_.seed, 505), opt_.workers)
                .value;
        p1_.emplace(key, v);
        return v;
    }

    DelayComponents components(double theta, double rho, double b) {
        GaussianMeanShiftModel model(theta);
        GeometricPrior prior(rho);
        const auto& os = overshoot(theta, rho);
        AnoApprox ano = ano_approx(b, model, prior, os.r_bar, os);
        return DelayComponents{os.r_bar, eta(theta, rho, b), p1_below(theta, rho, b),
                               ano.e_lambda_hat, ano.e_t_reentry};
    }

    const RunOptions& options() const { return opt_; }

private:
    RunOptions opt_;
    std::map<std::pair<double, double>, OvershootDistribution> overshoot_;
    std::map<std::tuple<double, double, double>, double> eta_;
    std::map<std::tuple<double, double, double>, double> p1_;
};

namespace rows {

struct Pfa {
    double theta, rho, a, b, sim_ref, analysis_ref;
};
inline const std::vector<Pfa>& pfa_table() {
    static const std::vector<Pfa> t = {
        {0.4, 0.01, 3.0, 0.0, 3.78e-2, 3.94e-2},
        {0.4, 0.01, 6.0, 2.0, 1.955e-3, 1.96e-3},
        {0.75, 0.01, 9.0, -2.0, 7.968e-5, 7.964e-5},
        {2.0, 0.01, 5.0, -4.0, 2.15e-3, 2.155e-3},
        {0.75, 0.005, 7.6, 3.0, 3.231e-4, 3.235e-4},
        {0.75, 0.1, 4.0, -3.0, 1.143e-2, 1.157e-2},
    };
    return t;
}

inline const std::vector<double>& pfa_b_sweep() {
    static const std::vector<double> b = {-2.2, -1.5, -0.85, 0.0, 0.85};
    return b;
}

struct Observations {
    double theta, rho, a, b;
    double ano_sim, ano_analysis, ano1_sim, ano1_analysis;
};
inline const std::vector<Observations>& observations_table() {
    static const std::vector<Observations> t = {
        {0.4, 0.01, 8.5, -2.2, 66.3, 62.88, 102.9, 111.7},
        {0.75, 0.01, 6.467, -2.2, 34.92, 34.24, 27.86, 29.46},
        {2.0, 0.01, 7.5, -4.0, 42.94, 46.4, 6.08, 6.23},
        {0.75, 0.005, 8.7, -3.0, 77.18, 75.09, 38.73, 40.38},
        {0.75, 0.1, 8.5, 0.0, 2.64, 3.2, 21.17, 22.18},
    };
    return t;
}

struct Delay {
    double theta, rho, a, b;
    double add_sim, add_analysis, pfa_sim, pfa_analysis;
};
inline const std::vector<Delay>& delay_table() {
    static const std::vector<Delay> t = {
        {0.4, 0.01, 8.5, -2.2, 104.9, 111.7, 1.608e-4, 1.608e-4},
        {0.75, 0.01, 6.467, -2.2, 32.3, 29.5, 1.002e-3, 1.004e-3},
        {2.0, 0.01, 7.5, -4.0, 6.1, 6.23, 1.77e-4, 1.768e-4},
        {0.75, 0.005, 8.7, -3.0, 42.6, 40.4, 1.076e-4, 1.076e-4},
        {0.75, 0.1, 8.5, 0.0, 23.9, 22.18, 1.286e-4, 1.285e-4},
    };
    return t;
}

struct RefinedDelayA {
    double a;
    double add_sim, analysis_eq_passage, add_new_ref;
};
/// rho = 0.05, theta = 0.75, b = 1.0 throughout.
inline const std::vector<RefinedDelayA>& refined_delay_a_sweep() {
    static const std::vector<RefinedDelayA> t = {
        {5.0, 30.0, 13.0, 34.0},   {9.0, 42.0, 25.0, 46.0},  {13.0, 54.0, 37.0, 58.0},
        {18.0, 69.0, 52.0, 73.0},  {50.0, 165.0, 149.0, 169.0},
    };
    return t;
}

struct RefinedDelayRho {
    double rho, a, b;
    double add_sim, add_new_ref, analysis_eq_passage;
};
/// theta = 0.75 throughout; PFA pinned around 1e-3.
inline const std::vector<RefinedDelayRho>& refined_delay_rho_sweep() {
    static const std::vector<RefinedDelayRho> t = {
        {0.01, 6.4, 2.7, 250.0, 260.0, 14.42},
        {0.005, 6.45, 0.6, 181.0, 190.0, 22.09},
        {0.001, 6.47, -2.7, 75.0, 80.0, 33.68},
        {0.0005, 6.47, -3.49, 74.0, 79.0, 36.49},
        {0.0001, 6.47, -5.2, 76.0, 80.0, 42.56},
    };
    return t;
}

}  // namespace rows

namespace detail {

inline PolicySpec make_policy(double a, double b) {
    if (b == kNegInf) return ShiryaevPolicy::from_log_odds(a);
    return TwoThresholdPolicy{ThresholdPair::from_log_odds(a, b)};
}

inline std::string row_label(double theta, double rho, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "theta=%g rho=%g a=%g b=%g", theta, rho, a, b);
    return buf;
}

}  // namespace detail

/// PFA: analytical approximation within 3%, simulated E[1-p_tau] within 10%.
inline TableResult run_pfa_table(OracleCache& cache) {
    const auto& opt = cache.options();
    TableResult res{"pfa", {}};
    std::uint64_t row_seed = derive_seed(opt.seed, 1);
    for (const auto& r : rows::pfa_table()) {
        GaussianMeanShiftModel model(r.theta);
        GeometricPrior prior(r.rho);
        double analysis = pfa_approx(r.a, cache.overshoot(r.theta, r.rho));
        McOptions mc;
        mc.n_workers = opt.workers;
        auto sim = estimate_metrics(detail::make_policy(r.a, r.b), model, prior,
                                    opt.sim_trials_pfa, row_seed++, mc);
        RowResult row{detail::row_label(r.theta, r.rho, r.a, r.b), {}};
        row.cells.push_back(Cell::rel("pfa_analysis", analysis, r.analysis_ref, 0.03));
        row.cells.push_back(Cell::rel("pfa_sim", sim.pfa, r.sim_ref, 0.10));
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// PFA invariance in b at a = 4.6: one analysis constant for every b, and the
/// simulated values pairwise within 3 combined standard errors.
inline TableResult run_pfa_b_invariance(OracleCache& cache) {
    const auto& opt = cache.options();
    const double theta = 0.75, rho = 0.01, a = 4.6;
    GaussianMeanShiftModel model(theta);
    GeometricPrior prior(rho);
    double analysis = pfa_approx(a, cache.overshoot(theta, rho));

    TableResult res{"pfa_b_invariance", {}};
    std::vector<double> pfa, se;
    std::uint64_t row_seed = derive_seed(opt.seed, 2);
    for (double b : rows::pfa_b_sweep()) {
        McOptions mc;
        mc.n_workers = opt.workers;
        auto sim = estimate_metrics(detail::make_policy(a, b), model, prior, opt.sim_trials_pfa,
                                    row_seed++, mc);
        pfa.push_back(sim.pfa);
        se.push_back(sim.pfa_se);
        RowResult row{detail::row_label(theta, rho, a, b), {}};
        row.cells.push_back(Cell::rel("pfa_analysis", analysis, 6.48e-3, 0.02));
        row.cells.push_back(Cell::rel("pfa_sim", sim.pfa, 6.44e-3, 0.10, /*gated=*/false));
        res.rows.push_back(std::move(row));
    }
    RowResult pairwise{"pairwise b-invariance", {}};
    for (std::size_t i = 0; i < pfa.size(); ++i)
        for (std::size_t j = i + 1; j < pfa.size(); ++j) {
            double diff = std::abs(pfa[i] - pfa[j]);
            double bound = 3.0 * std::hypot(se[i], se[j]);
            pairwise.cells.push_back(
                Cell::abs("diff_b" + std::to_string(i) + std::to_string(j), diff, 0.0, bound));
        }
    res.rows.push_back(std::move(pairwise));
    return res;
}

/// ANO / ANO1: analysis within 10% / 8%, simulation within 5%.
inline TableResult run_observations_table(OracleCache& cache) {
    const auto& opt = cache.options();
    TableResult res{"observations", {}};
    std::uint64_t row_seed = derive_seed(opt.seed, 3);
    for (const auto& r : rows::observations_table()) {
        GaussianMeanShiftModel model(r.theta);
        GeometricPrior prior(r.rho);
        const auto& os = cache.overshoot(r.theta, r.rho);
        double ano = ano_approx(r.b, model, prior, os.r_bar, os).value;
        double ano1 = e1_nu_b(r.a, r.b, model, prior, cache.eta(r.theta, r.rho, r.b), os.r_bar);
        McOptions mc;
        mc.n_workers = opt.workers;
        auto sim = estimate_metrics(detail::make_policy(r.a, r.b), model, prior,
                                    opt.sim_trials_delay, row_seed++, mc);
        RowResult row{detail::row_label(r.theta, r.rho, r.a, r.b), {}};
        row.cells.push_back(Cell::rel("ano_analysis", ano, r.ano_analysis, 0.10));
        row.cells.push_back(Cell::rel("ano1_analysis", ano1, r.ano1_analysis, 0.08));
        row.cells.push_back(Cell::rel("ano_sim", sim.ano, r.ano_sim, 0.05));
        row.cells.push_back(Cell::rel("ano1_sim", sim.ano1, r.ano1_sim, 0.05));
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// Conditional delay: simulation within 5%, second-order analysis within 10%,
/// ANO% within 2 percentage points. The ANO% reference is derived from the
/// published ANO column via ANO% = ANO * rho * 100 (its defining identity);
/// for the rho = 0.005 row the printed percentage skips the rho conversion.
inline TableResult run_delay_table(OracleCache& cache) {
    const auto& opt = cache.options();
    TableResult res{"delay", {}};
    std::uint64_t row_seed = derive_seed(opt.seed, 4);
    const auto& obs = rows::observations_table();
    for (std::size_t i = 0; i < rows::delay_table().size(); ++i) {
        const auto& r = rows::delay_table()[i];
        GaussianMeanShiftModel model(r.theta);
        GeometricPrior prior(r.rho);
        const auto& os = cache.overshoot(r.theta, r.rho);
        double analysis = e1_nu_b(r.a, r.b, model, prior, cache.eta(r.theta, r.rho, r.b), os.r_bar);
        McOptions mc;
        mc.n_workers = opt.workers;
        auto sim = estimate_metrics(detail::make_policy(r.a, r.b), model, prior,
                                    opt.sim_trials_delay, row_seed++, mc);
        double ano_percent_ref = obs[i].ano_sim * r.rho * 100.0;
        RowResult row{detail::row_label(r.theta, r.rho, r.a, r.b), {}};
        row.cells.push_back(Cell::rel("add_sim", sim.add, r.add_sim, 0.05));
        row.cells.push_back(Cell::rel("add_analysis", analysis, r.add_analysis, 0.10));
        row.cells.push_back(Cell::abs("ano_percent", sim.ano_percent(), ano_percent_ref, 2.0));
        row.cells.push_back(Cell::rel("pfa_sim", sim.pfa, r.pfa_sim, 0.15, /*gated=*/false));
        res.rows.push_back(std::move(row));
    }
    return res;
}

/// Refined delay approximation within 10% of the published values, both on
/// the a-sweep (rho = 0.05) and the rho-sweep at PFA ~ 1e-3.
inline TableResult run_refined_delay_tables(OracleCache& cache) {
    TableResult res{"refined_delay", {}};
    {
        const double theta = 0.75, rho = 0.05, b = 1.0;
        GaussianMeanShiftModel model(theta);
        GeometricPrior prior(rho);
        DelayComponents comp = cache.components(theta, rho, b);
        for (const auto& r : rows::refined_delay_a_sweep()) {
            double v = add_new(r.a, b, model, prior, comp);
            double passage = second_order_passage(r.a, comp.eta_b, comp.r_bar, model, prior);
            RowResult row{detail::row_label(theta, rho, r.a, b), {}};
            row.cells.push_back(Cell::rel("add_new", v, r.add_new_ref, 0.10));
            row.cells.push_back(
                Cell::rel("passage_analysis", passage, r.analysis_eq_passage, 0.10, false));
            res.rows.push_back(std::move(row));
        }
    }
    {
        const double theta = 0.75;
        GaussianMeanShiftModel model(theta);
        for (const auto& r : rows::refined_delay_rho_sweep()) {
            GeometricPrior prior(r.rho);
            DelayComponents comp = cache.components(theta, r.rho, r.b);
            double v = add_new(r.a, r.b, model, prior, comp);
            double passage = second_order_passage(r.a, comp.eta_b, comp.r_bar, model, prior);
            RowResult row{detail::row_label(theta, r.rho, r.a, r.b), {}};
            row.cells.push_back(Cell::rel("add_new", v, r.add_new_ref, 0.10));
            row.cells.push_back(
                Cell::rel("passage_analysis", passage, r.analysis_eq_passage, 0.10, false));
            res.rows.push_back(std::move(row));
        }
    }
    return res;
}

inline std::vector<TableResult> run_all_tables(const RunOptions& opt) {
    OracleCache cache(opt);
    std::vector<TableResult> out;
    out.push_back(run_pfa_table(cache));
    out.push_back(run_pfa_b_invariance(cache));
    out.push_back(run_observations_table(cache));
    out.push_back(run_delay_table(cache));
    out.push_back(run_refined_delay_tables(cache));
    return out;
}

/// Side-by-side layout: one row per configuration, one value/reference/pass
/// column triple per cell name (union over rows, first-appearance order).
inline std::string table_to_csv(const TableResult& t) {
    std::vector<std::string> names;
    for (const auto& row : t.rows)
        for (const auto& cell : row.cells)
            if (std::find(names.begin(), names.end(), cell.name) == names.end())
                names.push_back(cell.name);

    std::string s = "row";
    for (const auto& n : names) s += "," + n + "," + n + "_ref," + n + "_pass";
    s += "\n";
    char buf[64];
    for (const auto& row : t.rows) {
        s += row.label;
        for (const auto& n : names) {
            const Cell* found = nullptr;
            for (const auto& cell : row.cells)
                if (cell.name == n) {
                    found = &cell;
                    break;
                }
            if (found) {
                std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%d", found->value, found->reference,
                              found->pass ? 1 : 0);
                s += buf;
            } else {
                s += ",,,";
            }
        }
        s += "\n";
    }
    return s;
}

}  // namespace qcd::replication
