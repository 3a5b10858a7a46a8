#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sgghmc/config.hpp"
#include "sgghmc/constants.hpp"
#include "sgghmc/experiment.hpp"
#include "sgghmc/verify.hpp"

namespace {

using namespace sgghmc;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

ExperimentConfig load_config(const CommonArgs& args) {
    std::map<std::string, std::string> raw;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw ConfigError("config: cannot open '" + args.config_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        raw = parse_config_text(buf.str());
    }
    // precedence: flags > file > environment > default
    if (!raw.count("seed")) {
        if (const char* env = std::getenv("SGGHMC_SEED")) raw["seed"] = env;
    }
    for (const auto& kv : args.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (!detail::known_keys().count(key))
            throw ConfigError("--set: unknown key '" + key + "'");
        raw[key] = value;
    }
    ExperimentConfig cfg = build_config(raw);
    if (cfg.seed_defaulted)
        std::cout << "*** seed not set: using default seed 0 (set `seed` or SGGHMC_SEED) ***\n";
    return cfg;
}

void echo_effective_config(const ExperimentConfig& cfg) {
    if (cfg.output.empty()) return;
    write_text_file(cfg.output + ".effective.cfg", config_to_text(cfg));
}

void warn_if_inadmissible(const ForceField& field, const AlgoParams& params) {
    AdmissibilityReport rep = check_admissibility(field, params);
    if (!rep.pass())
        std::cout << "WARN: parameters fail the contraction theorem's admissibility"
                  << " (friction " << rep.friction_lhs << " <= " << rep.friction_rhs << ": "
                  << (rep.friction_ok ? "ok" : "FAIL") << ", stepsize " << rep.stepsize_lhs
                  << " <= " << rep.stepsize_rhs << ": " << (rep.stepsize_ok ? "ok" : "FAIL")
                  << "); run proceeds flagged\n";
}

int cmd_bounds(const CommonArgs& args, const std::string& csv_path) {
    ExperimentConfig cfg = load_config(args);
    ForceField field = make_field(cfg);
    DerivedConstants C = derive_constants(field, cfg.params, field.dim);
    AdmissibilityReport rep = check_admissibility(field, cfg.params);

    std::vector<std::pair<std::string, double>> rows = {
        {"m", C.m},
        {"L", C.L},
        {"R", C.R},
        {"T", C.T},
        {"h", C.h},
        {"eta", C.eta},
        {"gamma", C.gamma()},
        {"inv_gamma", C.inv_gamma},
        {"alpha", C.alpha},
        {"alpha_hat", C.alpha_hat},
        {"r_star", C.r_star},
        {"R_hat", C.R_hat},
        {"g", C.g},
        {"eps_star", C.eps_star},
        {"log_eps_star", C.log_eps_star},
        {"c0", C.c0},
        {"c", C.c},
        {"log_c", C.log_c},
        {"M1", C.M1},
        {"C_conc", C.C_conc},
        {"R_prime", C.R_prime},
        {"d_star", C.d_star},
        {"admissible", rep.pass() ? 1.0 : 0.0},
        {"friction_lhs", rep.friction_lhs},
        {"friction_rhs", rep.friction_rhs},
        {"stepsize_lhs", rep.stepsize_lhs},
        {"stepsize_rhs", rep.stepsize_rhs},
    };
    for (const auto& [k, v] : rows) std::printf("%-14s = %.12g\n", k.c_str(), v);
    if (!csv_path.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << "name,value\n";
        for (const auto& [k, v] : rows) os << k << ',' << v << '\n';
        write_text_file(csv_path, os.str());
    }
    return 0;
}

int cmd_verify(double scale) {
    auto results = run_verify_suite(scale);
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("%-5s %s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : (" --" + r.detail).c_str());
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 2;
}

int cmd_contract(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ForceField field = make_field(cfg);
    warn_if_inadmissible(field, cfg.params);
    ContractionResult res = run_contraction(cfg);
    echo_effective_config(cfg);
    if (!cfg.output.empty()) write_text_file(cfg.output, res.aggregates_csv);
    if (!cfg.records_output.empty()) write_text_file(cfg.records_output, res.records_csv);
    std::printf("steps=%zu fitted_rate_dhat=%.6g fitted_rate_rho=%.6g theoretical_c=%.6g\n",
                res.aggregates.size() - 1, res.fitted_rate_dhat, res.fitted_rate_rho,
                res.constants.c);
    std::printf("rho_bound_violations=%ld envelope_ok=%d final_mean_d=%.6g\n",
                res.rho_bound_violations, res.envelope_ok ? 1 : 0,
                res.aggregates.back().mean_d);
    return 0;
}

int cmd_concentrate(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ForceField field = make_field(cfg);
    warn_if_inadmissible(field, cfg.params);
    ConcentrationResult res = run_concentration(cfg, cfg.n0, cfg.n_avg, cfg.r_grid);
    echo_effective_config(cfg);
    if (!cfg.output.empty()) write_text_file(cfg.output, res.csv);
    for (const auto& row : res.rows)
        std::printf("r=%-8g empirical=%-10.4g bound=%-10.4g %s\n", row.r, row.empirical,
                    row.bound, row.within_bound ? "ok" : "VIOLATION");
    return 0;
}

int cmd_bias(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ForceField field = make_field(cfg);
    warn_if_inadmissible(field, cfg.params);
    BiasScanResult res = run_bias_scan(cfg, cfg.h_grid, cfg.hold_T);
    echo_effective_config(cfg);
    if (!cfg.output.empty()) write_text_file(cfg.output, res.csv);
    for (const auto& pt : res.points)
        std::printf("h=%-8g K=%-4d bias=%-12.6g stderr=%-10.4g%s\n", pt.h, pt.K, pt.bias,
                    pt.stderr_bias, pt.admissible ? "" : " [inadmissible]");
    std::printf("loglog_slope=%.4f\n", res.slope);
    return 0;
}

int cmd_sgbias(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ForceField field = make_field(cfg);
    warn_if_inadmissible(field, cfg.params);
    SgBiasResult res = run_sg_bias(cfg, cfg.p_grid);
    echo_effective_config(cfg);
    if (!cfg.output.empty()) write_text_file(cfg.output, res.csv);
    for (const auto& pt : res.points)
        std::printf("p=%-4d extra_bias=%-12.6g stderr=%-10.4g gap@n=%-10.4g bound@n=%-10.4g\n",
                    pt.p, pt.extra_bias, pt.stderr_extra, pt.gap_short, pt.bound_short);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SGgHMC sampler, coupled-chain experiments and bound calculator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string bounds_csv;
    double verify_scale = 1.0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("config", args.config_path, "config file (key = value)");
        if (needs_config) opt->required();
        sub->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
    };

    auto* bounds = app.add_subcommand("bounds", "print all derived constants and admissibility");
    add_common(bounds, true);
    bounds->add_option("--csv", bounds_csv, "also write the constants as CSV");

    auto* verify = app.add_subcommand("verify", "run the oracle suite; nonzero exit on violation");
    verify->add_option("--scale", verify_scale, "sample-count scale factor (default 1.0)");

    auto* contract = app.add_subcommand("contract", "coupled-chain contraction experiment");
    add_common(contract, true);
    auto* concentrate = app.add_subcommand("concentrate", "empirical-average concentration");
    add_common(concentrate, true);
    auto* bias = app.add_subcommand("bias", "invariant-measure bias scan over step sizes");
    add_common(bias, true);
    auto* sgbias = app.add_subcommand("sgbias", "stochastic-gradient bias experiment");
    add_common(sgbias, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (bounds->parsed()) return cmd_bounds(args, bounds_csv);
        if (verify->parsed()) return cmd_verify(verify_scale);
        if (contract->parsed()) return cmd_contract(args);
        if (concentrate->parsed()) return cmd_concentrate(args);
        if (bias->parsed()) return cmd_bias(args);
        if (sgbias->parsed()) return cmd_sgbias(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
