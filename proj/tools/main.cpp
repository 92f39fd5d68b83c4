#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "qcd/asymptotics.hpp"
#include "qcd/bellman.hpp"
#include "qcd/config.hpp"
#include "qcd/experiments.hpp"
#include "qcd/montecarlo.hpp"
#include "qcd/policy.hpp"
#include "qcd/replication.hpp"

using json = nlohmann::ordered_json;
using namespace qcd;

namespace {

struct Cli {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::int64_t trials = 0;
    ExperimentConfig cfg;
    std::string hash;

    void resolve() {
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (trials > 0) cfg.trials = trials;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        canonicalize(cfg);
        hash = config_hash(cfg);
        std::filesystem::create_directories(cfg.out_dir);
    }

    std::string path(const std::string& name) const { return cfg.out_dir + "/" + name; }
};

GaussianMeanShiftModel model_of(const ExperimentConfig& c) { return GaussianMeanShiftModel(c.theta); }
GeometricPrior prior_of(const ExperimentConfig& c) { return GeometricPrior(c.rho, c.pi0); }

McOptions mc_options(const ExperimentConfig& c) {
    McOptions o;
    o.horizon_cap = c.horizon_cap;
    o.p0 = c.p0;
    o.n_workers = c.workers;
    return o;
}

PolicySpec policy_of(const ExperimentConfig& c) {
    switch (c.policy) {
        case PolicyKind::shiryaev: return ShiryaevPolicy::from_log_odds(c.a);
        case PolicyKind::two_threshold:
            return TwoThresholdPolicy{ThresholdPair::from_log_odds(c.a, c.b)};
        case PolicyKind::fractional: return FractionalSamplingPolicy::from_log_odds(c.a, c.eps);
        case PolicyKind::dp: {
            ValueIterationOptions vo{c.grid_size, c.iterations, c.quad_nodes, c.dp_tol, c.workers};
            auto grid = std::make_shared<const ValueGrid>(
                value_iterate(model_of(c), prior_of(c), CostParams{c.lambda_f, c.lambda_e}, vo));
            return to_tabulated_policy(grid);
        }
    }
    throw std::logic_error("unreachable policy kind");
}

std::string policy_label(const ExperimentConfig& c) {
    char buf[128];
    switch (c.policy) {
        case PolicyKind::shiryaev:
            std::snprintf(buf, sizeof buf, "shiryaev(a=%.6g)", c.a);
            break;
        case PolicyKind::two_threshold:
            std::snprintf(buf, sizeof buf, "two-threshold(a=%.6g,b=%.6g)", c.a, c.b);
            break;
        case PolicyKind::fractional:
            std::snprintf(buf, sizeof buf, "fractional(a=%.6g,eps=%.6g)", c.a, c.eps);
            break;
        case PolicyKind::dp:
            std::snprintf(buf, sizeof buf, "dp(lambda_f=%.6g,lambda_e=%.6g)", c.lambda_f, c.lambda_e);
            break;
    }
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

json config_json(const Cli& cli) {
    json j;
    j["config_hash"] = cli.hash;
    j["config"] = serialize_config(cli.cfg);
    return j;
}

std::string metrics_csv(const Cli& cli, const MetricsEstimate& m) {
    const ExperimentConfig& c = cli.cfg;
    std::string s = "# config_hash=" + cli.hash + "\n";
    s += "config_hash,policy,rho,theta,a,b,n,ADD,ADD_se,PFA,PFA_se,ANO,ANO_se,ANO1,ANO1_se,"
         "ANO_percent,truncated_fraction\n";
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%.17g,%.17g,%.17g,%s,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g\n",
                  cli.hash.c_str(), policy_label(c).c_str(), c.rho, c.theta, c.a,
                  format_double(c.b).c_str(), static_cast<long long>(m.n_trials), m.add, m.add_se,
                  m.pfa, m.pfa_se, m.ano, m.ano_se, m.ano1, m.ano1_se, m.ano_percent(),
                  m.truncated_fraction);
    return s + buf;
}

json metrics_json(const MetricsEstimate& m) {
    json j;
    j["add"] = m.add;
    j["add_se"] = m.add_se;
    j["add_unconditional"] = m.add_unconditional;
    j["add_unconditional_se"] = m.add_unc_se;
    j["pfa"] = m.pfa;
    j["pfa_se"] = m.pfa_se;
    j["pfa_indicator"] = m.pfa_indicator;
    j["ano"] = m.ano;
    j["ano_se"] = m.ano_se;
    j["ano1"] = m.ano1;
    j["ano1_se"] = m.ano1_se;
    j["ano_percent"] = m.ano_percent();
    j["mean_tau"] = m.mean_tau;
    j["n_trials"] = m.n_trials;
    j["n_detections"] = m.n_detections;
    j["truncated_fraction"] = m.truncated_fraction;
    j["reliability_warning"] = m.reliability_warning;
    return j;
}

int cmd_bellman(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    ValueIterationOptions vo{c.grid_size, c.iterations, c.quad_nodes, c.dp_tol, c.workers};
    ValueGrid grid = value_iterate(model_of(c), prior_of(c), CostParams{c.lambda_f, c.lambda_e}, vo);
    if (!grid.converged)
        std::cerr << "warning: value iteration stopped at max_iters with sup-norm delta "
                  << grid.sup_norm_delta << "\n";

    PolicyStructure s;
    try {
        s = extract_structure(grid);
    } catch (const StructureError& e) {
        std::cerr << "structure error: " << e.what() << "\n";
        return 2;
    }

    std::ostringstream os;
    os << "# config_hash=" << cli.hash << "\n";
    write_grid_csv(grid, os);
    write_text(cli.path("bellman_grid.csv"), os.str());

    json j = config_json(cli);
    j["classification"] = s.classification == PolicyClass::TwoThreshold ? "TwoThreshold" : "MultiRegion";
    j["A"] = s.stop_threshold_A;
    j["A_uncertainty"] = s.stop_cell_width;
    j["B"] = s.B;
    if (std::isfinite(s.C)) j["C"] = s.C;
    j["take_region_boundaries"] = s.take_region_boundaries;
    j["all_crossings"] = s.all_crossings;
    j["iterations_run"] = grid.iterations_run;
    j["sup_norm_delta"] = grid.sup_norm_delta;
    j["converged"] = grid.converged;
    write_text(cli.path("bellman_structure.json"), j.dump(2) + "\n");

    std::cout << "classification=" << j["classification"].get<std::string>() << " A=" << s.stop_threshold_A
              << " B=" << s.B;
    if (std::isfinite(s.C)) std::cout << " C=" << s.C;
    std::cout << "\n";
    return 0;
}

int cmd_simulate(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    MetricsEstimate m =
        estimate_metrics(policy_of(c), model_of(c), prior_of(c), c.trials, c.seed, mc_options(c));
    write_text(cli.path("simulate.csv"), metrics_csv(cli, m));
    json j = config_json(cli);
    j["metrics"] = metrics_json(m);
    write_text(cli.path("simulate.json"), j.dump(2) + "\n");
    std::printf("ADD=%.4g PFA=%.4g ANO=%.4g ANO1=%.4g ANO%%=%.3g truncated=%.3g\n", m.add, m.pfa,
                m.ano, m.ano1, m.ano_percent(), m.truncated_fraction);
    if (m.reliability_warning) {
        std::cerr << "reliability warning: truncated fraction " << m.truncated_fraction << "\n";
        return 4;
    }
    return 0;
}

json calibration_json(const CalibrationResult& r) {
    json j;
    j["threshold"] = r.threshold;
    j["threshold_prob"] = r.threshold_prob;
    j["achieved"] = r.achieved;
    j["target"] = r.target;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    return j;
}

int cmd_calibrate(Cli& cli, bool calibrating_a) {
    const ExperimentConfig& c = cli.cfg;
    try {
        CalibrationResult r;
        if (calibrating_a) {
            double b = c.policy == PolicyKind::two_threshold ? c.b : kNegInf;
            r = calibrate_a(c.alpha, b, model_of(c), prior_of(c), c.trials, c.cal_tol_rel, c.seed,
                            mc_options(c));
        } else {
            r = calibrate_b(c.ano_percent, c.a, model_of(c), prior_of(c), c.trials, c.cal_tol_rel,
                            c.seed, mc_options(c));
        }
        json j = config_json(cli);
        j["calibration"] = calibration_json(r);
        write_text(cli.path(calibrating_a ? "calibrate_a.json" : "calibrate_b.json"),
                   j.dump(2) + "\n");
        std::printf("%s=%.6g achieved=%.6g target=%.6g iterations=%d\n",
                    calibrating_a ? "a" : "b", r.threshold, r.achieved, r.target, r.iterations);
        if (!r.converged) {
            std::cerr << "calibration did not converge\n";
            return 3;
        }
        return 0;
    } catch (const CalibrationError& e) {
        std::cerr << "calibration failure: " << e.what() << "\n";
        return 3;
    }
}

int cmd_tradeoff(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    auto points = tradeoff_curve(model_of(c), parse_list(c.rho_list), c.alpha,
                                 parse_list(c.ano_percent_list), c.trials, c.seed, mc_options(c));
    std::string s = "# config_hash=" + cli.hash + "\n";
    s += "rho,ano_percent_target,a,b,ADD,ADD_se,PFA,PFA_se,ANO_percent,ADD_shiryaev,"
         "ADD_shiryaev_se,add_ratio\n";
    bool all_ok = true;
    for (const auto& p : points) {
        char buf[512];
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      p.rho, p.ano_percent_target, p.a, format_double(p.b).c_str(), p.add, p.add_se,
                      p.pfa, p.pfa_se, p.ano_percent, p.add_shiryaev, p.add_shiryaev_se,
                      p.add / p.add_shiryaev);
        s += buf;
        all_ok = all_ok && p.calibrated;
    }
    write_text(cli.path("tradeoff.csv"), s);
    std::cout << "wrote " << points.size() << " trade-off points to " << cli.path("tradeoff.csv")
              << "\n";
    return all_ok ? 0 : 3;
}

int cmd_compare_fractional(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    auto points = compare_fractional(model_of(c), parse_list(c.rho_list), c.alpha, c.ano_percent,
                                     c.trials, c.seed, mc_options(c));
    std::string s = "# config_hash=" + cli.hash + "\n";
    s += "rho,ano_percent_target,a,b,a_frac,eps,ADD_two_threshold,ADD_two_threshold_se,"
         "ADD_fractional,ADD_fractional_se,ADD_shiryaev,ADD_shiryaev_se,PFA_two_threshold,"
         "PFA_fractional,ANO_percent_two_threshold,ANO_percent_fractional\n";
    for (const auto& p : points) {
        char buf[640];
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                      "%.17g,%.17g,%.17g\n",
                      p.rho, p.ano_percent_target, p.a, format_double(p.b).c_str(), p.a_frac, p.eps,
                      p.add_two_threshold, p.add_two_threshold_se, p.add_fractional,
                      p.add_fractional_se, p.add_shiryaev, p.add_shiryaev_se, p.pfa_two_threshold,
                      p.pfa_fractional, p.ano_percent_two_threshold, p.ano_percent_fractional);
        s += buf;
    }
    write_text(cli.path("compare_fractional.csv"), s);
    std::cout << "wrote " << points.size() << " comparison points to "
              << cli.path("compare_fractional.csv") << "\n";
    return 0;
}

int cmd_approx(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    if (c.b == kNegInf) {
        std::cerr << "approx: needs a finite b (two-threshold configuration)\n";
        return 1;
    }
    ApproxOptions ao;
    ao.n_crossings = c.crossings;
    ao.n_eta_paths = c.eta_paths;
    ao.n_p1_paths = c.p1_paths;
    ao.wall_mult = c.wall_mult;
    ao.seed = c.seed;
    ao.n_workers = c.workers;
    ApproxReport r = approx_report(model_of(c), prior_of(c), c.a, c.b, ao);

    json j = config_json(cli);
    json a;
    a["pfa_approx"] = r.pfa_approx;
    a["add_first_order"] = r.add_first_order;
    a["add_shiryaev"] = r.add_shiryaev;
    a["e1_nu_b"] = r.e1_nu_b;
    a["ano1_approx"] = r.ano1_approx;
    a["ano_approx"] = r.ano_approx;
    a["ano_pre_binomial"] = r.ano_pre_binomial;
    a["adds_cycle"] = r.adds_cycle;
    a["add_new"] = r.add_new;
    a["r_bar"] = r.r_bar;
    a["r_bar_se"] = r.r_bar_se;
    a["laplace_at_one"] = r.laplace_at_one;
    a["laplace_se"] = r.laplace_se;
    a["eta_b_mean"] = r.eta_b_mean;
    a["eta_b_se"] = r.eta_b_se;
    a["eta_minus_inf_mean"] = r.eta_minus_inf_mean;
    a["eta_minus_inf_se"] = r.eta_minus_inf_se;
    a["lambda_hat_mean"] = r.lambda_hat_mean;
    a["t_zhat_b_mean"] = r.t_zhat_b_mean;
    a["p1_below_b"] = r.p1_below_b;
    a["p1_below_b_se"] = r.p1_below_b_se;
    a["p_b"] = r.p_b;
    j["approx"] = a;
    write_text(cli.path("approx.json"), j.dump(2) + "\n");

    std::string s = "# config_hash=" + cli.hash + "\n";
    s += "theta,rho,a,b,pfa_approx,add_first_order,add_shiryaev,e1_nu_b,ano_approx,add_new\n";
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  c.theta, c.rho, c.a, c.b, r.pfa_approx, r.add_first_order, r.add_shiryaev,
                  r.e1_nu_b, r.ano_approx, r.add_new);
    write_text(cli.path("approx.csv"), s + buf);
    std::printf("pfa=%.4g e1_nu_b=%.4g ano=%.4g add_new=%.4g\n", r.pfa_approx, r.e1_nu_b,
                r.ano_approx, r.add_new);
    return 0;
}

int cmd_replicate_tables(Cli& cli) {
    const ExperimentConfig& c = cli.cfg;
    replication::RunOptions opt;
    opt.sim_trials_pfa = 10 * c.trials;
    opt.sim_trials_delay = c.trials;
    opt.crossings = c.crossings;
    opt.eta_paths = c.eta_paths;
    opt.p1_paths = c.p1_paths;
    opt.seed = c.seed;
    opt.workers = c.workers;

    auto tables = replication::run_all_tables(opt);
    bool all_pass = true;
    std::string csv = "# config_hash=" + cli.hash + "\n";
    csv += "table,row,cell,value,reference,tolerance,kind,gated,pass\n";
    for (const auto& t : tables) {
        for (const auto& row : t.rows) {
            for (const auto& cell : row.cells) {
                char buf[512];
                std::snprintf(buf, sizeof buf, "%s,%s,%s,%.10g,%.10g,%.10g,%s,%d,%d\n",
                              t.name.c_str(), row.label.c_str(), cell.name.c_str(), cell.value,
                              cell.reference, cell.tolerance, cell.absolute ? "abs" : "rel",
                              cell.gated ? 1 : 0, cell.pass ? 1 : 0);
                csv += buf;
                if (!cell.pass) all_pass = false;
                if (cell.gated)
                    std::printf("[%s] %s | %s | %s: %.6g vs %.6g (tol %s%.3g)\n",
                                cell.pass ? "PASS" : "FAIL", t.name.c_str(), row.label.c_str(),
                                cell.name.c_str(), cell.value, cell.reference,
                                cell.absolute ? "+/-" : "rel ", cell.tolerance);
            }
        }
    }
    write_text(cli.path("replicate_tables.csv"), csv);
    for (const auto& t : tables)
        write_text(cli.path("table_" + t.name + ".csv"),
                   "# config_hash=" + cli.hash + "\n" + replication::table_to_csv(t));
    std::cout << (all_pass ? "all gated cells PASS" : "some gated cells FAILED") << "\n";
    return all_pass ? 0 : 1;
}

int cmd_config_reference() {
    ExperimentConfig d;
    std::cout << "# Experiment configuration reference (all keys with defaults).\n"
              << "# Keys: model.theta | prior.rho prior.pi0 | policy.kind policy.a policy.b\n"
              << "#   policy.A policy.B (probability-scale alternatives) policy.eps policy.p0\n"
              << "# mc.trials mc.seed mc.horizon_cap (0 = auto) mc.workers (0 = hardware)\n"
              << "# dp.grid_size dp.iterations dp.quad_nodes dp.tol dp.lambda_f dp.lambda_e\n"
              << "# calibrate.alpha calibrate.ano_percent calibrate.tol_rel\n"
              << "# approx.crossings approx.eta_paths approx.p1_paths approx.wall_mult\n"
              << "# tradeoff.rho_list tradeoff.ano_percent_list | output.dir\n"
              << "# replicate-tables uses mc.trials for delay tables and 10x for PFA tables.\n\n"
              << serialize_config(d);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian quickest change detection with on-off observation control"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--config", cli.config_path, "experiment configuration file");
    app.add_option("--seed", cli.seed, "master seed override")->each([&](std::string) {
        cli.seed_set = true;
    });
    app.add_option("--trials", cli.trials, "Monte Carlo trials override");
    app.add_option("--out", cli.out_dir, "output directory override");

    auto* sc_bellman = app.add_subcommand("bellman", "value iteration and threshold structure");
    auto* sc_sim = app.add_subcommand("simulate", "Monte Carlo metrics for the configured policy");
    auto* sc_cal_a = app.add_subcommand("calibrate-a", "calibrate the stop threshold to a PFA target");
    auto* sc_cal_b = app.add_subcommand("calibrate-b", "calibrate the take threshold to an ANO% target");
    auto* sc_tradeoff = app.add_subcommand("tradeoff", "ANO%-ADD trade-off curves");
    auto* sc_frac = app.add_subcommand("compare-fractional", "compare against fractional sampling");
    auto* sc_approx = app.add_subcommand("approx", "analytical approximations report");
    auto* sc_tables = app.add_subcommand("replicate-tables", "reference table replication");
    auto* sc_ref = app.add_subcommand("config-reference", "print all configuration defaults");
    for (auto* sc : app.get_subcommands({})) sc->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_ref->parsed()) return cmd_config_reference();
        cli.resolve();
        if (sc_bellman->parsed()) return cmd_bellman(cli);
        if (sc_sim->parsed()) return cmd_simulate(cli);
        if (sc_cal_a->parsed()) return cmd_calibrate(cli, true);
        if (sc_cal_b->parsed()) return cmd_calibrate(cli, false);
        if (sc_tradeoff->parsed()) return cmd_tradeoff(cli);
        if (sc_frac->parsed()) return cmd_compare_fractional(cli);
        if (sc_approx->parsed()) return cmd_approx(cli);
        if (sc_tables->parsed()) return cmd_replicate_tables(cli);
    } catch (const CalibrationError& e) {
        std::cerr << "calibration failure: " << e.what() << "\n";
        return 3;
    } catch (const StructureError& e) {
        std::cerr << "structure error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
