// qslab command-line front end.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qslab/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qslab;

namespace {

struct Common {
    std::string config = "default";
    std::string out;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool with_seed) {
    app->add_option("--config", c.config, "config file (key = value), or 'default'");
    app->add_option("--out", c.out, "run directory (overrides config key 'out')");
    app->add_option("--threads", c.threads, "worker threads; affects wall time only");
    if (with_seed) app->add_option("--seed", c.seed, "base seed (flag > config > QSLAB_SEED)");
}

void log(const std::string& msg) { std::cerr << "[qslab] " << msg << std::endl; }

std::vector<double> parse_window(const std::string& key, const std::string& v) {
    auto w = detail::parse_list(key, v);
    detail::require_pair(w, key.c_str());
    return w;
}

int run(const std::string& command, const Common& common, RunConfig cfg, const std::string& extra,
        const std::function<std::vector<Section>(const RunConfig&, std::uint64_t, const fs::path&)>& body) {
    if (!common.out.empty()) cfg.out = common.out;
    if (common.threads) cfg.threads = *common.threads;
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    const std::uint64_t seed = resolve_seed(common.seed, cfg);
    cfg.seed = seed;

    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.threads = cfg.threads;
    m.started = utc_timestamp();
    m.config_digest = sha256_hex("command = " + command + "\n" + extra + canonical_config(cfg));

    const fs::path dir = ensure_dir(cfg.out);
    log(command + ": run directory " + dir.string());
    const auto sections = body(cfg, seed, dir);
    for (const auto& s : sections) m.artifacts.insert(m.artifacts.end(), s.files.begin(), s.files.end());
    const auto written = emit_report(sections, dir);
    m.artifacts.insert(m.artifacts.end(), written.begin(), written.end());
    m.exit_code = all_pass(sections) ? 0 : 1;
    for (const auto& s : sections) {
        for (const auto& c : s.checks) {
            log(s.name + "." + c.name + " = " + detail::fmt(c.value) + " (" + c.bound + ") " +
                (c.pass ? "pass" : "FAIL"));
        }
    }
    m.finished = utc_timestamp();
    m.write(dir);
    return m.exit_code;
}

DensityGrid load_grid(const std::string& path) {
    if (path.empty()) throw ConfigError("--grid is required");
    return DensityGrid::read_binary(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qslab: QuickSort limit law toolkit"};
    app.require_subcommand(1);
    app.footer(config_help());

    Common common;

    std::uint64_t nmax = 8;
    auto* moments = app.add_subcommand("moments", "exact moments of the comparison count");
    moments->add_option("--nmax", nmax, "largest n")->required()->check(CLI::Range(1ull, 1ull << 32));
    add_common(moments, common, false);

    std::uint64_t sim_n = 0, sim_count = 0;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo samples of Z_n");
    simulate->add_option("--n", sim_n, "list size")->required();
    simulate->add_option("--count", sim_count, "number of samples")->required();
    add_common(simulate, common, true);

    auto* solve_cmd = app.add_subcommand("solve", "solve the fixed-point equation for the density");
    add_common(solve_cmd, common, false);

    std::string grid_path, samples_path;
    auto* compare = app.add_subcommand("compare", "KS distance between a grid CDF and a sample");
    compare->add_option("--grid", grid_path)->required();
    compare->add_option("--samples", samples_path)->required();
    add_common(compare, common, false);

    std::string left_window, right_window;
    auto* tails = app.add_subcommand("tails", "tail shape fits and limsup proxies");
    tails->add_option("--grid", grid_path)->required();
    tails->add_option("--left-window", left_window, "A,B");
    tails->add_option("--right-window", right_window, "A,B");
    add_common(tails, common, false);

    std::optional<double> eps, b, delta;
    std::optional<int> kmax;
    auto* lemmas = app.add_subcommand("lemmas", "tail lower-bound lemmas on a grid");
    lemmas->add_option("--grid", grid_path)->required();
    lemmas->add_option("--eps", eps);
    lemmas->add_option("--b", b);
    lemmas->add_option("--delta", delta);
    lemmas->add_option("--kmax", kmax);
    add_common(lemmas, common, false);

    int lk_n = 2, lk_k = 1;
    auto* lk = app.add_subcommand("lk", "Landau-Kolmogorov checks on a grid");
    lk->add_option("--grid", grid_path)->required();
    lk->add_option("--n", lk_n)->required();
    lk->add_option("--k", lk_k)->required();
    add_common(lk, common, false);

    auto* report = app.add_subcommand("report", "full pipeline");
    add_common(report, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, std::cerr, std::cerr);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = load_config(common.config);
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();

        if (sub == moments) {
            return run(name, common, cfg, "nmax = " + std::to_string(nmax) + "\n",
                       [&](const RunConfig& c, std::uint64_t, const fs::path&) {
                           return std::vector<Section>{moments_section(nmax, c.moments_exact_max)};
                       });
        }
        if (sub == simulate) {
            return run(name, common, cfg, "n = " + std::to_string(sim_n) + "\ncount = " + std::to_string(sim_count) + "\n",
                       [&](const RunConfig& c, std::uint64_t seed, const fs::path& dir) {
                           SamplingOptions opt;
                           opt.threads = c.threads;
                           opt.leaf_cutoff = c.mc_leaf_cutoff;
                           const SampleSet s = sample_zn(sim_n, sim_count, seed, opt);
                           s.write_binary((dir / "samples.qszs").string());
                           std::ofstream csv(dir / "samples.csv", std::ios::binary);
                           s.write_csv(csv);
                           Section sec{"simulate"};
                           sec.summary = {{"n", sim_n}, {"count", sim_count}, {"seed", seed}};
                           sec.files = {"samples.qszs", "samples.csv"};
                           return std::vector<Section>{sec};
                       });
        }
        if (sub == solve_cmd) {
            return run(name, common, cfg, "", [&](const RunConfig& c, std::uint64_t, const fs::path& dir) {
                SolveOutcome o;
                return std::vector<Section>{solve_section(c, dir, o)};
            });
        }
        if (sub == compare) {
            return run(name, common, cfg, "grid = " + grid_path + "\nsamples = " + samples_path + "\n",
                       [&](const RunConfig& c, std::uint64_t, const fs::path&) {
                           return std::vector<Section>{compare_section(load_grid(grid_path),
                                                                       SampleSet::read_binary(samples_path), c.ks_tol)};
                       });
        }
        if (sub == tails) {
            if (!left_window.empty()) cfg.left_window = parse_window("--left-window", left_window);
            if (!right_window.empty()) cfg.right_window = parse_window("--right-window", right_window);
            return run(name, common, cfg, "grid = " + grid_path + "\n",
                       [&](const RunConfig& c, std::uint64_t, const fs::path&) {
                           return std::vector<Section>{tails_section(c, load_grid(grid_path), nullptr)};
                       });
        }
        if (sub == lemmas) {
            if (eps) cfg.lemma_eps = *eps;
            if (b) cfg.lemma_b = *b;
            if (delta) cfg.lemma_delta = *delta;
            if (kmax) cfg.lemma_k_left = cfg.lemma_k_right = *kmax;
            return run(name, common, cfg, "grid = " + grid_path + "\n",
                       [&](const RunConfig& c, std::uint64_t, const fs::path&) {
                           return std::vector<Section>{lemmas_section(load_grid(grid_path), c.lemma_eps,
                                                                      c.lemma_k_left, c.lemma_b, c.lemma_delta,
                                                                      c.lemma_k_right, c.lemma_step_z)};
                       });
        }
        if (sub == lk) {
            return run(name, common, cfg,
                       "grid = " + grid_path + "\nn = " + std::to_string(lk_n) + "\nk = " + std::to_string(lk_k) + "\n",
                       [&](const RunConfig& c, std::uint64_t, const fs::path&) {
                           return std::vector<Section>{lk_section(load_grid(grid_path), {{lk_n, lk_k}}, c.lk_xs,
                                                                  c.lk_slack)};
                       });
        }
        // report
        return run(name, common, cfg, "", [&](const RunConfig& c, std::uint64_t seed, const fs::path& dir) {
            std::vector<Section> out;
            using clock = std::chrono::steady_clock;
            auto timed = [&](const char* what, auto&& fn) {
                const auto t0 = clock::now();
                log(std::string("report: ") + what);
                out.push_back(fn());
                log(std::string("report: ") + what + " done in " +
                    std::to_string(std::chrono::duration<double>(clock::now() - t0).count()) + " s");
            };
            timed("moments", [&] { return moments_section(c.moments_exact_max, c.moments_exact_max); });
            timed("variance", [&] { return variance_section(c, seed); });
            SolveOutcome so;
            timed("solve", [&] { return solve_section(c, dir, so); });
            if (c.init_check) timed("init_independence", [&] { return init_section(c, so.grid, dir); });
            timed("compare", [&] {
                SamplingOptions opt;
                opt.threads = c.threads;
                opt.leaf_cutoff = c.mc_leaf_cutoff;
                const SampleSet s = sample_zn(c.mc_n, c.mc_count, seed + 1, opt);
                s.write_binary((dir / "samples.qszs").string());
                Section sec = compare_section(so.grid, s, c.ks_tol);
                sec.files.push_back("samples.qszs");
                return sec;
            });
            timed("lemmas", [&] {
                return lemmas_section(so.grid, c.lemma_eps, c.lemma_k_left, c.lemma_b, c.lemma_delta, c.lemma_k_right,
                                      c.lemma_step_z);
            });
            timed("tails", [&] { return tails_section(c, so.grid, so.trace.coarse.n_points() ? &so.trace.coarse : nullptr); });
            timed("derivs", [&] { return derivs_section(c, so.grid); });
            return out;
        });
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return 2;
    } catch (const ResourceError& e) {
        log(std::string("resource error: ") + e.what());
        return 2;
    } catch (const IoError& e) {
        log(std::string("io error: ") + e.what());
        return 2;
    } catch (const std::invalid_argument& e) {  // DomainError, ShapeError, UnsupportedOrder
        log(std::string("invalid input: ") + e.what());
        return 2;
    } catch (const std::domain_error& e) {
        log(std::string("invalid input: ") + e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        log(std::string("out of range: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log(std::string("check failure: ") + e.what());
        return 1;
    }
}
