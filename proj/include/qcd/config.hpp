#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/common.hpp"
#include "qcd/posterior.hpp"

namespace qcd {

enum class PolicyKind { shiryaev, two_threshold, fractional, dp };

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::shiryaev: return "shiryaev";
        case PolicyKind::two_threshold: return "two-threshold";
        case PolicyKind::fractional: return "fractional";
        case PolicyKind::dp: return "dp";
    }
    return "?";
}

/// Flat key-value experiment configuration with sections. Every field has a
/// default; the resolved form is echoed into all outputs together with its
/// hash so a run can be reproduced from any artifact it wrote.
struct ExperimentConfig {
    // [model]
    double theta = 0.75;
    // [prior]
    double rho = 0.01;
    double pi0 = 0.0;
    // [policy]
    PolicyKind policy = PolicyKind::two_threshold;
    double a = 6.467;           // log-odds stop threshold
    double b = -2.2;            // log-odds take threshold; -inf allowed
    double eps = 0.5;           // fractional sampling probability
    double p0 = 0.0;            // initial belief
    // [mc]
    std::int64_t trials = 100'000;
    std::uint64_t seed = 1;
    std::int64_t horizon_cap = 0;  // 0 = automatic
    int workers = 0;               // 0 = hardware concurrency
    // [dp]
    int grid_size = 2000;
    int iterations = 1500;
    int quad_nodes = 129;
    double dp_tol = 1e-9;
    double lambda_f = 50.0;
    double lambda_e = 0.5;
    // [calibrate]
    double alpha = 1e-4;
    double ano_percent = 30.0;
    double cal_tol_rel = 0.03;
    // [approx]
    std::int64_t crossings = 1'000'000;
    std::int64_t eta_paths = 1'000'000;
    std::int64_t p1_paths = 1'000'000;
    double wall_mult = 50.0;
    // [tradeoff]
    std::string rho_list = "0.05,0.01,0.005,0.001";
    std::string ano_percent_list = "75,50,30,15";
    // [output]
    std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& key) {
    if (v == "-inf") return kNegInf;
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    }
}

inline std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);  // accept 1e6 style counts
        if (pos != v.size() || d != std::floor(d)) throw std::invalid_argument(v);
        return static_cast<std::int64_t>(d);
    } catch (...) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    }
}

}  // namespace detail

/// Parses "[section]\nkey = value" text; '#' and ';' start comments.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line = line.substr(0, cut);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unterminated section");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = section + "." + detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));

        using detail::parse_double;
        using detail::parse_int;
        if (key == "model.theta") c.theta = parse_double(val, key);
        else if (key == "prior.rho") c.rho = parse_double(val, key);
        else if (key == "prior.pi0") c.pi0 = parse_double(val, key);
        else if (key == "policy.kind") {
            if (val == "shiryaev") c.policy = PolicyKind::shiryaev;
            else if (val == "two-threshold") c.policy = PolicyKind::two_threshold;
            else if (val == "fractional") c.policy = PolicyKind::fractional;
            else if (val == "dp") c.policy = PolicyKind::dp;
            else throw std::invalid_argument("config: unknown policy.kind: " + val);
        }
        else if (key == "policy.a") c.a = parse_double(val, key);
        else if (key == "policy.b") c.b = parse_double(val, key);
        else if (key == "policy.A") c.a = z_of_p(parse_double(val, key));
        else if (key == "policy.B") c.b = z_of_p(parse_double(val, key));
        else if (key == "policy.eps") c.eps = parse_double(val, key);
        else if (key == "policy.p0") c.p0 = parse_double(val, key);
        else if (key == "mc.trials") c.trials = parse_int(val, key);
        else if (key == "mc.seed") c.seed = static_cast<std::uint64_t>(parse_int(val, key));
        else if (key == "mc.horizon_cap") c.horizon_cap = parse_int(val, key);
        else if (key == "mc.workers") c.workers = static_cast<int>(parse_int(val, key));
        else if (key == "dp.grid_size") c.grid_size = static_cast<int>(parse_int(val, key));
        else if (key == "dp.iterations") c.iterations = static_cast<int>(parse_int(val, key));
        else if (key == "dp.quad_nodes") c.quad_nodes = static_cast<int>(parse_int(val, key));
        else if (key == "dp.tol") c.dp_tol = parse_double(val, key);
        else if (key == "dp.lambda_f") c.lambda_f = parse_double(val, key);
        else if (key == "dp.lambda_e") c.lambda_e = parse_double(val, key);
        else if (key == "calibrate.alpha") c.alpha = parse_double(val, key);
        else if (key == "calibrate.ano_percent") c.ano_percent = parse_double(val, key);
        else if (key == "calibrate.tol_rel") c.cal_tol_rel = parse_double(val, key);
        else if (key == "approx.crossings") c.crossings = parse_int(val, key);
        else if (key == "approx.eta_paths") c.eta_paths = parse_int(val, key);
        else if (key == "approx.p1_paths") c.p1_paths = parse_int(val, key);
        else if (key == "approx.wall_mult") c.wall_mult = parse_double(val, key);
        else if (key == "tradeoff.rho_list") c.rho_list = val;
        else if (key == "tradeoff.ano_percent_list") c.ano_percent_list = val;
        else if (key == "output.dir") c.out_dir = val;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    return parse_config(in);
}

/// B = 0 makes the two-threshold rule decision-equivalent to the
/// always-observe rule on every trajectory; fold it to the canonical kind and
/// pin fields the chosen kind ignores, so equivalent configurations hash
/// (and output) identically.
inline void canonicalize(ExperimentConfig& c) {
    if (c.policy == PolicyKind::two_threshold && c.b == kNegInf) c.policy = PolicyKind::shiryaev;
    if (c.policy == PolicyKind::shiryaev) c.b = kNegInf;
    if (c.policy != PolicyKind::fractional) c.eps = 0.5;
}

inline std::string format_double(double v) {
    if (v == kNegInf) return "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Canonical text form of the fully-resolved configuration.
inline std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[model]\ntheta = " << format_double(c.theta) << "\n";
    os << "[prior]\nrho = " << format_double(c.rho) << "\npi0 = " << format_double(c.pi0) << "\n";
    os << "[policy]\nkind = " << to_string(c.policy) << "\na = " << format_double(c.a)
       << "\nb = " << format_double(c.b) << "\neps = " << format_double(c.eps)
       << "\np0 = " << format_double(c.p0) << "\n";
    os << "[mc]\ntrials = " << c.trials << "\nseed = " << c.seed
       << "\nhorizon_cap = " << c.horizon_cap << "\nworkers = " << c.workers << "\n";
    os << "[dp]\ngrid_size = " << c.grid_size << "\niterations = " << c.iterations
       << "\nquad_nodes = " << c.quad_nodes << "\ntol = " << format_double(c.dp_tol)
       << "\nlambda_f = " << format_double(c.lambda_f)
       << "\nlambda_e = " << format_double(c.lambda_e) << "\n";
    os << "[calibrate]\nalpha = " << format_double(c.alpha)
       << "\nano_percent = " << format_double(c.ano_percent)
       << "\ntol_rel = " << format_double(c.cal_tol_rel) << "\n";
    os << "[approx]\ncrossings = " << c.crossings << "\neta_paths = " << c.eta_paths
       << "\np1_paths = " << c.p1_paths << "\nwall_mult = " << format_double(c.wall_mult) << "\n";
    os << "[tradeoff]\nrho_list = " << c.rho_list
       << "\nano_percent_list = " << c.ano_percent_list << "\n";
    // output.dir is routing, not experiment identity: two runs of the same
    // experiment into different directories must hash identically.
    return os.str();
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_config(c))));
    return buf;
}

inline std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(detail::parse_double(item, "list"));
    }
    return out;
}

}  // namespace qcd
