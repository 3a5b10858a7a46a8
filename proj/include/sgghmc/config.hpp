#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "algo.hpp"
#include "model.hpp"

namespace sgghmc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full experiment description. Defaults match the README's documented key
// table; `target`, `K`, `h` and `eta` must always be given.
struct ExperimentConfig {
    std::string target;  // gaussian | double_well | minibatch_gaussian_mixture
    int dim = 1;
    double curvature = 1.0;
    double a = 1.0;
    double scale = 1.0;
    double offset = 1.0;
    int components = 2;
    int batch = 0;  // 0: full batch

    AlgoParams params;

    long ensemble = 100;
    long steps = 1000;
    long burn_in = -1;  // -1: steps/10
    std::uint64_t seed = 0;
    bool seed_defaulted = true;
    std::string observable = "x1";
    std::string output;
    std::string records_output;
    int threads = 1;

    double x0 = 1.0, y0 = 0.0, v0 = 0.0, w0 = 0.0;  // coordinate-0 start offsets
    double r_star = 0.0;  // 0: the derived default (1-eta)/(T^2(1+eta))

    long n0 = 1;
    long n_avg = 100;
    std::vector<double> r_grid = {0.05, 0.1, 0.2, 0.4};

    std::vector<double> h_grid = {0.02, 0.04, 0.08, 0.16};
    bool hold_T = true;

    std::vector<int> p_grid = {1, 2};
    long horizon = 10;

    long effective_burn_in() const { return burn_in >= 0 ? burn_in : steps / 10; }
};

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "target",     "dim",       "curvature", "a",          "scale",    "offset",
        "components", "batch",     "K",         "h",          "eta",      "u",
        "ensemble",   "steps",     "burn_in",   "seed",       "observable",
        "output",     "records_output",         "threads",    "x0",       "y0",
        "v0",         "w0",        "r_star",    "n0",         "n_avg",    "r_grid",
        "h_grid",     "hold_T",    "p_grid",    "horizon"};
    return keys;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
inline double parse_number<double>(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config key '" + key + "': trailing characters in '" + value + "'");
    return v;
}

template <>
inline long parse_number<long>(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    long v;
    try {
        v = std::stol(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config key '" + key + "': trailing characters in '" + value + "'");
    return v;
}

template <>
inline int parse_number<int>(const std::string& key, const std::string& value) {
    long v = parse_number<long>(key, value);
    return static_cast<int>(v);
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace detail

// Line-based `key = value` text with '#' comments. Unknown and duplicate
// keys are errors naming the offending line.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> raw;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (!detail::known_keys().count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        if (raw.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
        raw[key] = value;
    }
    return raw;
}

inline ExperimentConfig build_config(const std::map<std::string, std::string>& raw) {
    using detail::parse_number;
    for (const char* req : {"target", "K", "h", "eta"})
        if (!raw.count(req))
            throw ConfigError(std::string("config: missing required key '") + req + "'");

    ExperimentConfig c;
    auto get = [&](const char* k) -> const std::string* {
        auto it = raw.find(k);
        return it == raw.end() ? nullptr : &it->second;
    };

    c.target = *get("target");
    if (c.target != "gaussian" && c.target != "double_well" &&
        c.target != "minibatch_gaussian_mixture")
        throw ConfigError("config key 'target': unknown target '" + c.target + "'");

    if (auto* v = get("dim")) c.dim = parse_number<int>("dim", *v);
    if (auto* v = get("curvature")) c.curvature = parse_number<double>("curvature", *v);
    if (auto* v = get("a")) c.a = parse_number<double>("a", *v);
    if (auto* v = get("scale")) c.scale = parse_number<double>("scale", *v);
    if (auto* v = get("offset")) c.offset = parse_number<double>("offset", *v);
    if (auto* v = get("components")) c.components = parse_number<int>("components", *v);
    if (auto* v = get("batch")) c.batch = parse_number<int>("batch", *v);

    c.params.K = parse_number<int>("K", *get("K"));
    c.params.h = parse_number<double>("h", *get("h"));
    c.params.eta = parse_number<double>("eta", *get("eta"));
    if (auto* v = get("u")) c.params.u = parse_number<int>("u", *v);
    if (!(c.params.eta >= 0.0 && c.params.eta < 1.0))
        throw ConfigError("config key 'eta': value must lie in the admissible range [0,1)");
    c.params.validate();

    if (auto* v = get("ensemble")) c.ensemble = parse_number<long>("ensemble", *v);
    if (auto* v = get("steps")) c.steps = parse_number<long>("steps", *v);
    if (auto* v = get("burn_in")) c.burn_in = parse_number<long>("burn_in", *v);
    if (auto* v = get("seed")) {
        c.seed = static_cast<std::uint64_t>(parse_number<long>("seed", *v));
        c.seed_defaulted = false;
    }
    if (auto* v = get("observable")) c.observable = *v;
    if (auto* v = get("output")) c.output = *v;
    if (auto* v = get("records_output")) c.records_output = *v;
    if (auto* v = get("threads")) c.threads = parse_number<int>("threads", *v);
    if (auto* v = get("x0")) c.x0 = parse_number<double>("x0", *v);
    if (auto* v = get("y0")) c.y0 = parse_number<double>("y0", *v);
    if (auto* v = get("v0")) c.v0 = parse_number<double>("v0", *v);
    if (auto* v = get("w0")) c.w0 = parse_number<double>("w0", *v);
    if (auto* v = get("r_star")) c.r_star = parse_number<double>("r_star", *v);
    if (c.r_star < 0.0) throw ConfigError("config key 'r_star': must be positive when set");
    if (auto* v = get("n0")) c.n0 = parse_number<long>("n0", *v);
    if (auto* v = get("n_avg")) c.n_avg = parse_number<long>("n_avg", *v);
    if (auto* v = get("r_grid")) c.r_grid = detail::parse_double_list("r_grid", *v);
    if (auto* v = get("h_grid")) c.h_grid = detail::parse_double_list("h_grid", *v);
    if (auto* v = get("hold_T")) c.hold_T = detail::parse_bool("hold_T", *v);
    if (auto* v = get("p_grid")) c.p_grid = detail::parse_int_list("p_grid", *v);
    if (auto* v = get("horizon")) c.horizon = parse_number<long>("horizon", *v);

    if (c.ensemble < 1) throw ConfigError("config key 'ensemble': must be >= 1");
    if (c.steps < 1) throw ConfigError("config key 'steps': must be >= 1");
    if (c.effective_burn_in() >= c.steps)
        throw ConfigError("config key 'burn_in': must be smaller than steps");
    if (c.threads < 1) throw ConfigError("config key 'threads': must be >= 1");
    if (c.observable != "x1" && c.observable != "norm_x" && c.observable != "mean_potential")
        throw ConfigError("config key 'observable': unknown observable '" + c.observable + "'");
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return build_config(parse_config_text(buf.str()));
}

// Canonical echo of the effective configuration; re-parsing it reproduces
// the configuration exactly.
inline std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream os;
    os.precision(17);
    auto list_d = [](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    auto list_i = [](const std::vector<int>& v) {
        std::ostringstream s;
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    os << "target = " << c.target << "\n";
    os << "dim = " << c.dim << "\n";
    os << "curvature = " << c.curvature << "\n";
    os << "a = " << c.a << "\n";
    os << "scale = " << c.scale << "\n";
    os << "offset = " << c.offset << "\n";
    os << "components = " << c.components << "\n";
    os << "batch = " << c.batch << "\n";
    os << "K = " << c.params.K << "\n";
    os << "h = " << c.params.h << "\n";
    os << "eta = " << c.params.eta << "\n";
    os << "u = " << c.params.u << "\n";
    os << "ensemble = " << c.ensemble << "\n";
    os << "steps = " << c.steps << "\n";
    os << "burn_in = " << c.effective_burn_in() << "\n";
    os << "seed = " << c.seed << "\n";
    os << "observable = " << c.observable << "\n";
    if (!c.output.empty()) os << "output = " << c.output << "\n";
    if (!c.records_output.empty()) os << "records_output = " << c.records_output << "\n";
    os << "threads = " << c.threads << "\n";
    os << "x0 = " << c.x0 << "\n";
    os << "y0 = " << c.y0 << "\n";
    os << "v0 = " << c.v0 << "\n";
    os << "w0 = " << c.w0 << "\n";
    if (c.r_star > 0.0) os << "r_star = " << c.r_star << "\n";
    os << "n0 = " << c.n0 << "\n";
    os << "n_avg = " << c.n_avg << "\n";
    os << "r_grid = " << list_d(c.r_grid) << "\n";
    os << "h_grid = " << list_d(c.h_grid) << "\n";
    os << "hold_T = " << (c.hold_T ? "true" : "false") << "\n";
    os << "p_grid = " << list_i(c.p_grid) << "\n";
    os << "horizon = " << c.horizon << "\n";
    return os.str();
}

inline ForceField make_field(const ExperimentConfig& c) {
    if (c.target == "gaussian") return make_gaussian_target(c.dim, c.curvature);
    if (c.target == "double_well") return make_double_well_target(c.dim, c.a, c.scale);
    int p = c.batch > 0 ? c.batch : c.components;
    return make_minibatch_gaussian_mixture(c.dim, c.curvature, c.offset, c.components, p);
}

inline std::function<double(const Vec&)> make_observable(const ExperimentConfig& c,
                                                         const ForceField& field) {
    if (c.observable == "x1") return [](const Vec& x) { return x[0]; };
    if (c.observable == "norm_x") return [](const Vec& x) { return norm(x); };
    auto pot = field.potential;
    if (!pot) throw ConfigError("observable 'mean_potential' needs a potential-backed target");
    return [pot](const Vec& x) { return pot(x); };
}

}  // namespace sgghmc
