#pragma once

// Fixed-point iteration of the integral equation for the limit density:
//
//   f(x) = int_0^1 int f(z) f((x - g(u) - (1-u) z)/u) / u dz du.
//
// Folding u -> 1-u onto (0, 1/2] gives
//
//   f(x) = 2 int_0^{1/2} 1/(1-u) int f(w) f((x - g(u) - u w)/(1-u)) dw du,
//
// whose inner Jacobian stays in [1, 2]. The w-integral runs over grid nodes
// (trapezoid), f at the off-grid argument is interpolated, and the u-integral
// uses geometric Gauss-Legendre panels toward u = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qslab/core_math.hpp"
#include "qslab/density_model.hpp"
#include "qslab/errors.hpp"
#include "qslab/parallel.hpp"
#include "qslab/quadrature.hpp"

#if !defined(QSLAB_NO_VECTOR_EXP) && defined(__AVX2__) && defined(__x86_64__) && defined(__GLIBC__)
#include <immintrin.h>
#define QSLAB_VECTOR_EXP 1
// glibc libmvec, x86_64 vector function ABI: 4-lane AVX2 exp.
extern "C" __m256d _ZGVdN4v_exp(__m256d);
#endif

namespace qslab {

enum class InitKind { gaussian, uniform, file };

struct SolverConfig {
    double x_min = -2.5;
    double x_max = 12.0;
    std::size_t n_points = 4097;
    unsigned u_panels = 12;
    unsigned u_order = 8;
    double tol_l1 = 1e-6;
    std::size_t max_iter = 200;
    InitKind init = InitKind::gaussian;
    std::string init_path;  // used when init == file

    unsigned threads = 1;
    /// Upper bound on (x nodes) * (u nodes) * (w nodes) per operator application.
    double quadrature_budget = 2.0e11;
    /// Coarse pre-solve: iterate on a grid with (n_points-1)/coarsen + 1 nodes
    /// first, then continue on the full grid. 1 disables it.
    unsigned coarsen = 1;
    /// Pin the mean at 0 after every application inside solve().
    bool recenter = true;

    void validate() const {
        if (!(x_max > x_min)) throw DomainError("domain: x_max must exceed x_min");
        if (!(x_min < 0.0 && x_max > 0.0)) throw DomainError("domain must contain 0");
        if (n_points < 16) throw DomainError("n_points must be at least 16");
        if (u_panels < 4) throw DomainError("u_panels must be >= 4");
        if (!(tol_l1 > 0.0)) throw DomainError("tol_l1 must be positive");
        if (max_iter < 1) throw DomainError("max_iter must be >= 1");
        if (coarsen < 1 || (n_points - 1) % coarsen != 0) {
            throw DomainError("coarsen must divide n_points - 1");
        }
        if (init == InitKind::file && init_path.empty()) throw DomainError("init = file requires a path");
        (void)gauss_legendre(u_order);
    }
};

/// L1 distance between two grids of identical geometry (trapezoid rule).
inline double residual(const DensityGrid& a, const DensityGrid& b) {
    if (!a.same_geometry(b)) throw ShapeError("residual: grids differ in geometry");
    const std::size_t n = a.n_points();
    double s = 0.5 * (std::fabs(a.values[0] - b.values[0]) + std::fabs(a.values[n - 1] - b.values[n - 1]));
    for (std::size_t i = 1; i + 1 < n; ++i) s += std::fabs(a.values[i] - b.values[i]);
    return s * a.spacing();
}

inline double linf_distance(const DensityGrid& a, const DensityGrid& b) {
    if (!a.same_geometry(b)) throw ShapeError("linf_distance: grids differ in geometry");
    double m = 0.0;
    for (std::size_t i = 0; i < a.n_points(); ++i) m = std::max(m, std::fabs(a.values[i] - b.values[i]));
    return m;
}

/// Result of one operator application before renormalisation is folded in.
struct OperatorOutput {
    DensityGrid grid;
    double raw_mass = 0.0;  // trapezoid mass before renormalisation
};

namespace detail {

// Per-interval interpolation data: log-linear when both ends are positive.
struct Interpolant {
    double x_min = 0.0;
    double inv_h = 0.0;
    std::size_t last = 0;  // n_points - 1
    std::vector<double> log_lo;
    std::vector<double> log_slope;
    std::vector<double> lin_lo;
    std::vector<double> lin_slope;
    std::vector<char> use_log;

    explicit Interpolant(const DensityGrid& f)
        : x_min(f.x_min), inv_h(1.0 / f.spacing()), last(f.n_points() - 1) {
        log_lo.resize(last);
        log_slope.resize(last);
        lin_lo.resize(last);
        lin_slope.resize(last);
        use_log.resize(last);
        for (std::size_t i = 0; i < last; ++i) {
            const double la = f.log_values[i];
            const double lb = f.log_values[i + 1];
            use_log[i] = std::isfinite(la) && std::isfinite(lb);
            log_lo[i] = use_log[i] ? la : 0.0;
            log_slope[i] = use_log[i] ? lb - la : 0.0;
            lin_lo[i] = f.values[i];
            lin_slope[i] = f.values[i + 1] - f.values[i];
        }
    }
};

// sum_{j=j0}^{j1} exp(wlog[j] + lo[i] + theta * slope[i]) with t = t0 - step * j,
// i = floor(t), theta = t - i; every interval must be in log mode.
inline double sum_log_linear(const double* wlog, const double* lo, const double* slope, std::size_t j0,
                             std::size_t j1, double t0, double step, double tmax, std::size_t last) {
    double s = 0.0;
    std::size_t j = j0;
#ifdef QSLAB_VECTOR_EXP
    if (j1 >= j0 + 4) {
        const __m256d vstep = _mm256_set1_pd(step);
        const __m256d vzero = _mm256_setzero_pd();
        const __m256d vtmax = _mm256_set1_pd(tmax);
        const __m128i vlast = _mm_set1_epi32(static_cast<int>(last) - 1);
        const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
        __m256d acc = _mm256_setzero_pd();
        for (; j + 3 <= j1; j += 4) {
            const __m256d jj = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(j)), lane);
            __m256d t = _mm256_sub_pd(_mm256_set1_pd(t0), _mm256_mul_pd(vstep, jj));
            t = _mm256_min_pd(_mm256_max_pd(t, vzero), vtmax);
            __m128i idx = _mm256_cvttpd_epi32(t);
            idx = _mm_min_epi32(idx, vlast);
            const __m256d theta = _mm256_sub_pd(t, _mm256_cvtepi32_pd(idx));
            const __m256d l = _mm256_i32gather_pd(lo, idx, 8);
            const __m256d sl = _mm256_i32gather_pd(slope, idx, 8);
            const __m256d e = _mm256_add_pd(_mm256_loadu_pd(wlog + j), _mm256_fmadd_pd(theta, sl, l));
            acc = _mm256_add_pd(acc, _ZGVdN4v_exp(e));
        }
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, acc);
        s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    }
#endif
    for (; j <= j1; ++j) {
        const double t = std::clamp(t0 - step * static_cast<double>(j), 0.0, tmax);
        std::size_t i = std::min(static_cast<std::size_t>(t), last - 1);
        const double theta = t - static_cast<double>(i);
        s += std::exp(wlog[j] + lo[i] + theta * slope[i]);
    }
    return s;
}

}  // namespace detail

/// One application of the integral operator. The output is renormalised to
/// unit trapezoid mass; the pre-renormalisation mass is returned alongside.
inline OperatorOutput apply_T_raw(const DensityGrid& fin, const SolverConfig& cfg) {
    const std::size_t n = fin.n_points();
    const QuadratureRule urule = geometric_half_unit_rule(cfg.u_panels, cfg.u_order);
    const double work = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(urule.size());
    if (work > cfg.quadrature_budget) {
        throw ResourceError("apply_T: " + std::to_string(work) + " kernel evaluations exceed the quadrature budget");
    }
    const double h = fin.spacing();
    const detail::Interpolant ip(fin);

    // Inner w-weights: trapezoid weights times log f(w); nodes with f(w) = 0 drop out.
    std::vector<double> wlog(n);
    std::size_t w_first = n, w_last = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const double tw = (j == 0 || j + 1 == n) ? 0.5 * h : h;
        wlog[j] = std::log(tw) + fin.log_values[j];
        if (std::isfinite(wlog[j])) {
            w_first = std::min(w_first, j);
            w_last = j;
        }
    }
    if (w_first > w_last) throw NumericalFailure("apply_T: input density is identically zero");

    struct UNode {
        double u, gu, inv_1mu, slope, log_weight;
    };
    std::vector<UNode> unodes;
    for (std::size_t q = 0; q < urule.size(); ++q) {
        const double u = urule.nodes[q];
        // 2 * weight / (1-u) folds the symmetric half and the Jacobian.
        unodes.push_back({u, g(u), 1.0 / (1.0 - u), u / (1.0 - u), std::log(2.0 * urule.weights[q] / (1.0 - u))});
    }

    DensityGrid out = DensityGrid::empty(fin.x_min, fin.x_max, n);
    const double tmax = static_cast<double>(ip.last);

    struct TermRange {
        std::size_t j0 = 1, j1 = 0;  // empty by default
        double t0 = 0.0;             // grid coordinate of the argument at j = 0
    };
    // w nodes whose argument (x - g(u) - u w)/(1-u) lies on the grid.
    auto term_range = [&](double x, const UNode& un) {
        TermRange r;
        const double base = (x - un.gu) * un.inv_1mu;
        const double w_hi = (base - fin.x_min) / un.slope;
        const double w_lo = (base - fin.x_max) / un.slope;
        if (w_hi < fin.x_min) return r;
        std::size_t j0 = w_first, j1 = w_last;
        if (w_lo > fin.x_min) j0 = std::max(j0, static_cast<std::size_t>(std::ceil((w_lo - fin.x_min) / h)));
        if (w_hi < fin.x_max) j1 = std::min(j1, static_cast<std::size_t>(std::floor((w_hi - fin.x_min) / h)));
        r.j0 = j0;
        r.j1 = j1;
        r.t0 = (base - fin.x_min - un.slope * fin.x_min) * ip.inv_h;
        return r;
    };
    // Visits log(weight_j * f(w_j) * f(arg_j)) over the range, in increasing j.
    auto for_each_term = [&](const TermRange& r, const UNode& un, auto&& visit) {
        for (std::size_t j = r.j0; j <= r.j1; ++j) {
            const double t = std::clamp(r.t0 - un.slope * static_cast<double>(j), 0.0, tmax);
            const std::size_t i = std::min(static_cast<std::size_t>(t), ip.last - 1);
            const double theta = t - static_cast<double>(i);
            if (ip.use_log[i]) {
                visit(wlog[j] + ip.log_lo[i] + theta * ip.log_slope[i]);
            } else {
                const double v = ip.lin_lo[i] + theta * ip.lin_slope[i];
                if (v > 0.0) visit(wlog[j] + std::log(v));
            }
        }
    };
    const bool all_log = std::all_of(ip.use_log.begin(), ip.use_log.end(), [](char c) { return c != 0; });

    parallel_blocks(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<TermRange> ranges(unodes.size());
        for (std::size_t i = begin; i < end; ++i) {
            const double x = out.node(i);
            double total = 0.0;
            for (std::size_t q = 0; q < unodes.size(); ++q) {
                const UNode& un = unodes[q];
                const TermRange& r = ranges[q] = term_range(x, un);
                double part = 0.0;
                if (r.j0 > r.j1) {
                    // argument never on the grid
                } else if (all_log) {
                    part = detail::sum_log_linear(wlog.data(), ip.log_lo.data(), ip.log_slope.data(), r.j0, r.j1,
                                                  r.t0, un.slope, tmax, ip.last);
                } else {
                    for_each_term(r, un, [&](double e) { part += std::exp(e); });
                }
                if (std::isnan(part) || part < 0.0) {
                    std::ostringstream msg;
                    msg << "apply_T: invalid partial integral " << part << " at x = " << x << ", u = " << un.u;
                    throw NumericalFailure(msg.str());
                }
                total += std::exp(un.log_weight) * part;
            }
            if (total > 1e-280) {
                out.values[i] = total;
                out.log_values[i] = std::log(total);
                continue;
            }
            // Deep tail: repeat the sum in log space, shifted by the largest term.
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < unodes.size(); ++q) {
                const double lw = unodes[q].log_weight;
                for_each_term(ranges[q], unodes[q], [&](double e) { top = std::max(top, e + lw); });
            }
            if (!std::isfinite(top)) {
                out.values[i] = 0.0;
                out.log_values[i] = -std::numeric_limits<double>::infinity();
                continue;
            }
            double rescaled = 0.0;
            for (std::size_t q = 0; q < unodes.size(); ++q) {
                const double lw = unodes[q].log_weight;
                for_each_term(ranges[q], unodes[q], [&](double e) { rescaled += std::exp(e + lw - top); });
            }
            out.log_values[i] = top + std::log(rescaled);
            out.values[i] = std::exp(out.log_values[i]);
        }
    });

    const double mass = total_mass(out);
    if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalFailure("apply_T: output mass is not positive");
    const double log_mass = std::log(mass);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] /= mass;
        out.log_values[i] -= log_mass;
    }
    out.meta = fin.meta;
    out.meta.normalization_defect = mass - 1.0;
    return {std::move(out), mass};
}

inline DensityGrid apply_T(const DensityGrid& fin, const SolverConfig& cfg) {
    const double m = total_mass(fin);
    if (std::fabs(m - 1.0) > 1e-2) {
        throw DomainError("apply_T: input mass " + std::to_string(m) + " is not normalised within 1e-2");
    }
    return apply_T_raw(fin, cfg).grid;
}

/// Gaussian with mean 0 and variance 7 - 2 pi^2 / 3.
inline DensityGrid gaussian_init(double x_min, double x_max, std::size_t n) {
    const double var = Constants::var_z;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    auto gr = DensityGrid::from_log_function(x_min, x_max, n, [&](double x) { return log_norm - 0.5 * x * x / var; });
    const double m = total_mass(gr);
    for (std::size_t i = 0; i < n; ++i) {
        gr.values[i] /= m;
        gr.log_values[i] -= std::log(m);
    }
    return gr;
}

/// Uniform density on the widest interval symmetric about 0 inside the grid.
inline DensityGrid uniform_init(double x_min, double x_max, std::size_t n) {
    const double half = std::min(-x_min, x_max);
    auto gr = DensityGrid::from_function(x_min, x_max, n, [&](double x) { return std::fabs(x) <= half ? 1.0 : 0.0; });
    const double m = total_mass(gr);
    for (std::size_t i = 0; i < n; ++i) {
        gr.values[i] /= m;
        gr.log_values[i] = gr.values[i] > 0.0 ? std::log(gr.values[i]) : -std::numeric_limits<double>::infinity();
    }
    return gr;
}

/// Resamples a grid onto new geometry by log-linear interpolation.
inline DensityGrid resample(const DensityGrid& src, double x_min, double x_max, std::size_t n) {
    DensityGrid gr = DensityGrid::empty(x_min, x_max, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = gr.node(i);
        if (!src.contains(x)) continue;
        gr.values[i] = src.value_at(x);
        const double lv = src.log_value_at(x);
        gr.log_values[i] = std::isfinite(lv) ? lv : std::log(gr.values[i]);
    }
    const double m = total_mass(gr);
    for (std::size_t i = 0; i < n; ++i) {
        gr.values[i] /= m;
        gr.log_values[i] -= std::log(m);
    }
    return gr;
}

/// Translates a grid density by -shift: out(x_i) = in(x_i + shift), log-linear
/// in the interior and log-linearly extrapolated past either end.
inline DensityGrid shift_grid(const DensityGrid& src, double shift) {
    DensityGrid out = src;
    const std::size_t n = src.n_points();
    const double h = src.spacing();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (src.node(i) + shift - src.x_min) / h;
        const std::size_t k = static_cast<std::size_t>(std::clamp(std::floor(t), 0.0, static_cast<double>(n - 2)));
        const double theta = t - static_cast<double>(k);
        const double la = src.log_values[k];
        const double lb = src.log_values[k + 1];
        if (std::isfinite(la) && std::isfinite(lb)) {
            out.log_values[i] = la + theta * (lb - la);
            out.values[i] = std::exp(out.log_values[i]);
        } else {
            const double v = std::max(0.0, src.values[k] + theta * (src.values[k + 1] - src.values[k]));
            out.values[i] = (theta >= 0.0 && theta <= 1.0) ? v : 0.0;
            out.log_values[i] = out.values[i] > 0.0 ? std::log(out.values[i]) : -std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

/// Shifts a grid so its trapezoid mean is 0 and renormalises it.
inline DensityGrid recenter(const DensityGrid& src) {
    DensityGrid out = shift_grid(src, moments(src).mean);
    const double m = total_mass(out);
    const double lm = std::log(m);
    for (std::size_t i = 0; i < out.n_points(); ++i) {
        out.values[i] /= m;
        out.log_values[i] -= lm;
    }
    return out;
}

struct SolveTrace {
    std::vector<double> l1_changes;  // fine-grid iterations only
    std::vector<double> coarse_changes;
    /// Final coarse-stage grid, empty when coarsen == 1. Used for Richardson
    /// estimates of the discretisation error.
    DensityGrid coarse;
};

namespace detail {

inline DensityGrid initial_grid(const SolverConfig& cfg, double x_min, double x_max, std::size_t n) {
    switch (cfg.init) {
        case InitKind::gaussian: return gaussian_init(x_min, x_max, n);
        case InitKind::uniform: return uniform_init(x_min, x_max, n);
        case InitKind::file: {
            const DensityGrid g0 = DensityGrid::read_binary(cfg.init_path);
            return g0.same_geometry(DensityGrid::empty(x_min, x_max, n)) ? g0 : resample(g0, x_min, x_max, n);
        }
    }
    throw DomainError("unknown init kind");
}

inline double max_log_change(const DensityGrid& a, const DensityGrid& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.n_points(); ++i) {
        const double d = std::fabs(a.log_values[i] - b.log_values[i]);
        m = std::isnan(d) ? std::numeric_limits<double>::infinity() : std::max(m, d);
    }
    return m;
}

// Iterates until the L1 change falls to tol (and, when log_tol > 0, the largest
// change of ln f falls to log_tol); returns the last iterate.
inline DensityGrid iterate(DensityGrid f, const SolverConfig& cfg, double tol, double log_tol, std::size_t max_iter,
                           std::vector<double>& trace, bool throw_on_failure) {
    for (std::size_t it = 0; it < max_iter; ++it) {
        DensityGrid next = apply_T_raw(f, cfg).grid;
        // Translates of a fixed point are fixed points; quadrature error drifts
        // the mean along that family unless it is pinned at 0.
        if (cfg.recenter) next = recenter(next);
        const double change = residual(next, f);
        trace.push_back(change);
        next.meta.iterations = f.meta.iterations + 1;
        next.meta.residual = change;
        const bool tails_settled = log_tol <= 0.0 || max_log_change(next, f) <= log_tol;
        f = std::move(next);
        if (change <= tol && tails_settled) return f;
    }
    if (throw_on_failure) {
        std::ostringstream msg;
        msg << "solve: no convergence within " << max_iter << " iterations; last L1 change "
            << (trace.empty() ? 0.0 : trace.back());
        throw ConvergenceError(msg.str(), trace);
    }
    return f;
}

}  // namespace detail

/// Iterates the operator from cfg.init until the L1 change is <= tol_l1.
///
/// meta.iterations counts fine-grid applications; the coarse pre-solve (when
/// enabled) only supplies the starting point.
inline DensityGrid solve(const SolverConfig& cfg, SolveTrace* trace = nullptr) {
    cfg.validate();
    SolveTrace local;
    SolveTrace& tr = trace ? *trace : local;
    DensityGrid f;
    if (cfg.coarsen > 1) {
        const std::size_t nc = (cfg.n_points - 1) / cfg.coarsen + 1;
        DensityGrid coarse = detail::initial_grid(cfg, cfg.x_min, cfg.x_max, nc);
        // The coarse stage also settles ln f in the tails, which L1 barely sees.
        coarse = detail::iterate(std::move(coarse), cfg, cfg.tol_l1, 1e-6, 4 * cfg.max_iter, tr.coarse_changes, false);
        f = resample(coarse, cfg.x_min, cfg.x_max, cfg.n_points);
        tr.coarse = std::move(coarse);
    } else {
        f = detail::initial_grid(cfg, cfg.x_min, cfg.x_max, cfg.n_points);
    }
    f.meta = {};
    f = detail::iterate(std::move(f), cfg, cfg.tol_l1, 0.0, cfg.max_iter, tr.l1_changes, true);
    for (std::size_t i = 0; i < f.n_points(); ++i) {
        if (!std::isfinite(f.log_values[i])) {
            throw NumericalFailure("solve: converged density is not positive at x = " + std::to_string(f.node(i)));
        }
    }
    return f;
}

}  // namespace qslab
