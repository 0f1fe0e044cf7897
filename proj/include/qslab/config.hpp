#pragma once

// Run configuration: a flat key = value file with documented defaults.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "qslab/errors.hpp"
#include "qslab/fixpoint_solver.hpp"

namespace qslab {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::uint64_t kDefaultSeed = 20240601;

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::string out = "qslab_run";
    unsigned threads = 1;

    std::uint64_t moments_enum_max = 8;
    std::uint64_t moments_exact_max = 2000;

    std::uint64_t variance_n = 100000;
    std::uint64_t variance_count = 100000;
    double variance_tol = 0.01;

    std::uint64_t mc_n = 100000;
    std::uint64_t mc_count = 1000000;
    std::uint32_t mc_leaf_cutoff = 96;

    SolverConfig solver = [] {
        SolverConfig c;
        c.coarsen = 4;
        return c;
    }();
    double mean_tol = 1e-3;
    double var_tol = 5e-3;
    double ks_tol = 0.01;
    bool init_check = true;
    double init_factor = 10.0;

    double lemma_eps = 0.05;
    int lemma_k_left = 5;
    double lemma_b = 0.5;
    double lemma_delta = 0.02;
    int lemma_k_right = 4;
    std::vector<double> lemma_step_z = {2.0, 2.5, 3.0};

    std::vector<double> left_window = {0.8, 2.2};
    std::vector<double> right_window = {3.0, 11.0};
    std::vector<double> left_slope_band = {1.2, 2.4};
    double right_ratio_x = 10.0;
    std::vector<double> right_ratio_band = {0.7, 1.8};
    double band_c_max = 5.0;
    double limsup_step = 0.1;

    double lk_slack = 1.1;
    int lk_n_max = 6;
    std::vector<double> lk_xs = {0.0, 0.5, 1.0, 2.0};

    std::size_t phi_points = 512;
    int phi_p_max = 3;
    int fk_k_max = 6;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    }
    return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false");
}

inline std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string fmt(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

inline std::string fmt(InitKind k) {
    return k == InitKind::gaussian ? "gaussian" : k == InitKind::uniform ? "uniform" : "file";
}

}  // namespace detail

struct ConfigKey {
    std::string name;
    std::string doc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
#define QSLAB_NUM(KEY, FIELD, T, DOC)                                                                 \
    ConfigKey{KEY, DOC, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<T>(KEY, v); }, \
              [](const RunConfig& c) {                                                              \
                  if constexpr (std::is_integral_v<T>) return std::to_string(c.FIELD);             \
                  else return fmt(static_cast<double>(c.FIELD));                                   \
              }}
#define QSLAB_LIST(KEY, FIELD, DOC)                                                                  \
    ConfigKey{KEY, DOC, [](RunConfig& c, const std::string& v) { c.FIELD = parse_list(KEY, v); }, \
              [](const RunConfig& c) { return fmt(c.FIELD); }}
    static const std::vector<ConfigKey> keys = {
        ConfigKey{"seed", "base seed (flag > config > QSLAB_SEED > built-in)",
                  [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                  [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string("unset"); }},
        ConfigKey{"out", "run directory", [](RunConfig& c, const std::string& v) { c.out = v; },
                  [](const RunConfig& c) { return c.out; }},
        QSLAB_NUM("threads", threads, unsigned, "worker threads (wall time only)"),
        QSLAB_NUM("moments.enum_max", moments_enum_max, std::uint64_t, "largest n for exhaustive enumeration"),
        QSLAB_NUM("moments.exact_max", moments_exact_max, std::uint64_t, "largest n for rational moments"),
        QSLAB_NUM("variance.n", variance_n, std::uint64_t, "n for the Var Z_n estimate"),
        QSLAB_NUM("variance.count", variance_count, std::uint64_t, "samples for the Var Z_n estimate"),
        QSLAB_NUM("variance.tol", variance_tol, double, "tolerance against 7 - 2pi^2/3"),
        QSLAB_NUM("mc.n", mc_n, std::uint64_t, "n for the KS comparison sample"),
        QSLAB_NUM("mc.count", mc_count, std::uint64_t, "samples for the KS comparison"),
        QSLAB_NUM("mc.leaf_cutoff", mc_leaf_cutoff, std::uint32_t, "exact-law table size in the sampler"),
        QSLAB_NUM("solver.x_min", solver.x_min, double, "left end of the grid"),
        QSLAB_NUM("solver.x_max", solver.x_max, double, "right end of the grid"),
        QSLAB_NUM("solver.n_points", solver.n_points, std::size_t, "grid nodes"),
        QSLAB_NUM("solver.u_panels", solver.u_panels, unsigned, "geometric u panels"),
        QSLAB_NUM("solver.u_order", solver.u_order, unsigned, "Gauss-Legendre order per panel"),
        QSLAB_NUM("solver.tol_l1", solver.tol_l1, double, "L1 stopping tolerance"),
        QSLAB_NUM("solver.max_iter", solver.max_iter, std::size_t, "fine-grid iteration cap"),
        ConfigKey{"solver.init", "gaussian | uniform | file",
                  [](RunConfig& c, const std::string& v) {
                      if (v == "gaussian") c.solver.init = InitKind::gaussian;
                      else if (v == "uniform") c.solver.init = InitKind::uniform;
                      else if (v == "file") c.solver.init = InitKind::file;
                      else throw ConfigError("config key 'solver.init': unknown value '" + v + "'");
                  },
                  [](const RunConfig& c) { return fmt(c.solver.init); }},
        ConfigKey{"solver.init_path", "grid file for init = file",
                  [](RunConfig& c, const std::string& v) { c.solver.init_path = v; },
                  [](const RunConfig& c) { return c.solver.init_path; }},
        QSLAB_NUM("solver.coarsen", solver.coarsen, unsigned, "coarse pre-solve factor (1 = off)"),
        QSLAB_NUM("check.mean_tol", mean_tol, double, "grid mean tolerance"),
        QSLAB_NUM("check.var_tol", var_tol, double, "grid variance tolerance"),
        QSLAB_NUM("check.ks_tol", ks_tol, double, "KS tolerance solver vs MC"),
        ConfigKey{"check.init", "also solve from uniform init and compare",
                  [](RunConfig& c, const std::string& v) { c.init_check = parse_bool("check.init", v); },
                  [](const RunConfig& c) { return std::string(c.init_check ? "true" : "false"); }},
        QSLAB_NUM("check.init_factor", init_factor, double, "L-inf bound in units of tol_l1"),
        QSLAB_NUM("lemma.eps", lemma_eps, double, "left lemma eps"),
        QSLAB_NUM("lemma.k_left", lemma_k_left, int, "left lemma k_max"),
        QSLAB_NUM("lemma.b", lemma_b, double, "right lemma b"),
        QSLAB_NUM("lemma.delta", lemma_delta, double, "right lemma delta"),
        QSLAB_NUM("lemma.k_right", lemma_k_right, int, "right lemma k_max"),
        QSLAB_LIST("lemma.step_z", lemma_step_z, "z values for the step lemma"),
        QSLAB_LIST("tails.left_window", left_window, "x range for the left fit (f(-x))"),
        QSLAB_LIST("tails.right_window", right_window, "x range for the right profile"),
        QSLAB_LIST("tails.left_slope", left_slope_band, "accepted left slope band"),
        QSLAB_NUM("tails.right_ratio_x", right_ratio_x, double, "x for the right ratio check"),
        QSLAB_LIST("tails.right_ratio", right_ratio_band, "accepted right ratio band"),
        QSLAB_NUM("tails.c_max", band_c_max, double, "largest accepted band constant C"),
        QSLAB_NUM("tails.limsup_step", limsup_step, double, "x spacing of the limsup proxy table"),
        QSLAB_NUM("lk.slack", lk_slack, double, "multiplicative slack on LK checks"),
        QSLAB_NUM("lk.n_max", lk_n_max, int, "largest n in the LK sweep"),
        QSLAB_LIST("lk.xs", lk_xs, "x values for LK checks"),
        QSLAB_NUM("phi.points", phi_points, std::size_t, "t points up to the Nyquist limit"),
        QSLAB_NUM("phi.p_max", phi_p_max, int, "largest p in the |phi| decay check"),
        QSLAB_NUM("fk.k_max", fk_k_max, int, "largest k in the sup |f^(k)| check"),
    };
#undef QSLAB_NUM
#undef QSLAB_LIST
    return keys;
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys()) {
        if (k.name == key) {
            k.set(c, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

/// Parses `key = value` lines; '#' starts a comment. Repeated keys are errors.
inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::map<std::string, int> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (seen[key]++) throw ConfigError("config key '" + key + "' given twice");
        set_config_value(c, key, value);
    }
    return c;
}

/// "default" (or empty) selects the built-in defaults.
inline RunConfig load_config(const std::string& path) {
    if (path.empty() || path == "default") return {};
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

/// Canonical `key = value` dump of every key in registry order.
inline std::string canonical_config(const RunConfig& c) {
    std::string s;
    for (const auto& k : config_keys()) s += k.name + " = " + k.get(c) + "\n";
    return s;
}

inline std::string config_help() {
    std::string s = "config keys (key = value, '#' comments):\n";
    const RunConfig defaults;
    for (const auto& k : config_keys()) s += "  " + k.name + " = " + k.get(defaults) + "    " + k.doc + "\n";
    return s;
}

/// Seed precedence: flag, then config, then QSLAB_SEED, then kDefaultSeed.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const RunConfig& c) {
    if (flag) return *flag;
    if (c.seed) return *c.seed;
    if (const char* env = std::getenv("QSLAB_SEED"); env && *env) {
        return detail::parse_number<std::uint64_t>("QSLAB_SEED", env);
    }
    return kDefaultSeed;
}

}  // namespace qslab
