#pragma once

// Tail lemmas and envelope diagnostics evaluated on a computed density grid.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "qslab/core_math.hpp"
#include "qslab/density_model.hpp"
#include "qslab/errors.hpp"

namespace qslab {

enum class LemmaId { left_recurrence, left_iterated, right_step, right_chain, right_iterated };

inline const char* to_string(LemmaId id) {
    switch (id) {
        case LemmaId::left_recurrence: return "left_recurrence";
        case LemmaId::left_iterated: return "left_iterated";
        case LemmaId::right_step: return "right_step";
        case LemmaId::right_chain: return "right_chain";
        case LemmaId::right_iterated: return "right_iterated";
    }
    return "?";
}

/// One instantiated "lhs >= rhs" inequality.
///
/// Both sides are compared in log space (`log_lhs`, `log_rhs`) because the
/// iterated bounds underflow long before the inequality becomes interesting;
/// `lhs`/`rhs` are their exponentials and may be 0.
struct LemmaReport {
    LemmaId lemma_id{};
    std::vector<std::pair<std::string, double>> parameters;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double log_lhs = 0.0;
    double log_rhs = 0.0;
    bool pass = false;

    static LemmaReport make(LemmaId id, std::vector<std::pair<std::string, double>> params, double log_lhs,
                            double log_rhs) {
        LemmaReport r{id, std::move(params)};
        r.log_lhs = log_lhs;
        r.log_rhs = log_rhs;
        r.lhs = std::exp(log_lhs);
        r.rhs = std::exp(log_rhs);
        r.margin = r.lhs - r.rhs;
        r.pass = log_lhs >= log_rhs;
        return r;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json p = nlohmann::ordered_json::object();
        for (const auto& [k, v] : parameters) p[k] = v;
        return {{"lemma_id", to_string(lemma_id)}, {"parameters", p},    {"lhs", lhs},
                {"rhs", rhs},                      {"margin", margin},   {"log_lhs", log_lhs},
                {"log_rhs", log_rhs},              {"pass", pass}};
    }
};

/// m_{ka} >= 2 eps^3 m_{(k-1)a}^2 (k >= 3) and m_{ka} >= (2 eps^3 m_{2a})^{2^{k-2}}
/// (k >= 2), with a = -g(1/2 - eps) and the capped left running minimum m.
inline std::vector<LemmaReport> verify_left_lemma(const DensityGrid& gr, double eps, int k_max) {
    if (!(eps > 0.0 && eps < 0.1)) throw DomainError("verify_left_lemma: eps must lie in (0, 1/10)");
    if (k_max < 2) throw DomainError("verify_left_lemma: k_max must be >= 2");
    const double a = left_step(eps);
    const int feasible = static_cast<int>(std::floor(-gr.x_min / a));
    if (k_max > feasible) {
        throw DomainError("verify_left_lemma: k_max * a exceeds the left reach of the grid; max feasible k = " +
                          std::to_string(feasible));
    }
    auto log_m = [&](double z) { return std::min(0.0, log_tail_min(gr, Side::left, z)); };
    const double log_coef = std::log(2.0 * eps * eps * eps);
    const double log_m2 = log_m(2.0 * a);
    std::vector<LemmaReport> out;
    for (int k = 2; k <= k_max; ++k) {
        const double log_mk = log_m(k * a);
        if (k >= 3) {
            out.push_back(LemmaReport::make(LemmaId::left_recurrence, {{"eps", eps}, {"a", a}, {"k", k}}, log_mk,
                                            log_coef + 2.0 * log_m((k - 1) * a)));
        }
        out.push_back(LemmaReport::make(LemmaId::left_iterated, {{"eps", eps}, {"a", a}, {"k", k}}, log_mk,
                                        std::ldexp(1.0, k - 2) * (log_coef + log_m2)));
    }
    return out;
}

/// c = 2 [F(1) - F(0)].
inline double right_constant(const DensityGrid& gr) {
    const GridCdf c(gr);
    return 2.0 * (c.integral_to(1.0) - c.integral_to(0.0));
}

/// Right-tail lemmas with the uncapped running minimum m_z over [0, z]:
///   right_step:     f(z + b) >= c delta m_z at each z in step_z
///   right_chain:    m_{2+kb} >= c delta m_{2+(k-1)b}, k = 2..k_max
///   right_iterated: m_{2+kb} >= (c delta)^{k-1} m_3, k = 1..k_max
inline std::vector<LemmaReport> verify_right_lemmas(const DensityGrid& gr, double b, double delta, int k_max,
                                                    std::span<const double> step_z = {}) {
    static constexpr double kDefaultZ[] = {2.0, 2.5, 3.0};
    if (step_z.empty()) step_z = kDefaultZ;
    if (!(b >= 0.0 && b < 1.0)) throw DomainError("verify_right_lemmas: requires 0 <= b < 1");
    if (!(delta > 0.0 && delta < 0.5)) throw DomainError("verify_right_lemmas: requires 0 < delta < 1/2");
    if (k_max < 1) throw DomainError("verify_right_lemmas: k_max must be >= 1");
    const double gd = g(delta);
    if (gd < b) throw DomainError("verify_right_lemmas: g(delta) >= b violated");
    const double z_cap = (gd - b) / delta;
    if (2.0 + (k_max - 1) * b > z_cap) {
        throw DomainError("verify_right_lemmas: 2 + (k_max - 1) b <= (g(delta) - b)/delta violated");
    }
    if (2.0 + k_max * b > gr.x_max || 3.0 > gr.x_max) {
        throw DomainError("verify_right_lemmas: grid reach < 2 + k_max b");
    }
    for (double z : step_z) {
        if (z < 2.0 || z > z_cap) throw DomainError("verify_right_lemmas: step lemma needs 2 <= z <= (g(delta)-b)/delta");
        if (z + b > gr.x_max) throw DomainError("verify_right_lemmas: z + b beyond the grid");
    }
    const double c = right_constant(gr);
    const double log_cd = std::log(c * delta);
    auto log_m = [&](double z) { return log_tail_min(gr, Side::right, z); };
    std::vector<LemmaReport> out;
    for (double z : step_z) {
        out.push_back(LemmaReport::make(LemmaId::right_step, {{"b", b}, {"delta", delta}, {"c", c}, {"z", z}},
                                        gr.log_value_at(z + b), log_cd + log_m(z)));
    }
    for (int k = 2; k <= k_max; ++k) {
        out.push_back(LemmaReport::make(LemmaId::right_chain, {{"b", b}, {"delta", delta}, {"c", c}, {"k", k}},
                                        log_m(2.0 + k * b), log_cd + log_m(2.0 + (k - 1) * b)));
    }
    const double log_m3 = log_m(3.0);
    for (int k = 1; k <= k_max; ++k) {
        out.push_back(LemmaReport::make(LemmaId::right_iterated, {{"b", b}, {"delta", delta}, {"c", c}, {"k", k}},
                                        log_m(2.0 + k * b), (k - 1) * log_cd + log_m3));
    }
    return out;
}

struct LeftFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::size_t nodes = 0;
    std::vector<std::pair<double, double>> points;  // (x, ln(-ln f(-x)))
};

/// Least-squares line through ln(-ln f(-x)) against x over grid nodes with
/// -x in the window. The slope targets gamma; the intercept is only a
/// finite-window surrogate for the unknown additive constant.
inline LeftFit left_envelope_fit(const DensityGrid& gr, double x_lo, double x_hi) {
    if (!(x_hi > x_lo && x_lo >= 0.0)) throw DomainError("left_envelope_fit: bad window");
    if (-x_hi < gr.x_min) throw DomainError("left_envelope_fit: window beyond the left end of the grid");
    LeftFit fit{0, 0, 0, x_lo, x_hi, 0, {}};
    for (std::size_t i = 0; i < gr.n_points(); ++i) {
        const double x = -gr.node(i);
        if (x < x_lo || x > x_hi) continue;
        const double lf = gr.log_values[i];
        if (!std::isfinite(lf) || lf >= 0.0) continue;
        fit.points.emplace_back(x, std::log(-lf));
    }
    std::sort(fit.points.begin(), fit.points.end());
    fit.nodes = fit.points.size();
    if (fit.nodes < 8) throw DomainError("left_envelope_fit: fewer than 8 usable nodes in the window");
    double sx = 0, sy = 0;
    for (const auto& [x, y] : fit.points) {
        sx += x;
        sy += y;
    }
    const double n = static_cast<double>(fit.nodes);
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

struct RightProfile {
    std::vector<std::pair<double, double>> ratio;  // (x, -ln f(x) / (x ln x))
    /// Smallest C >= 0 with 1 - C/ln x <= ratio <= 1 + ln ln x / ln x + C/ln x
    /// at every profile point.
    double band_constant = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
};

inline RightProfile right_envelope_fit(const DensityGrid& gr, double x_lo, double x_hi) {
    if (!(x_lo >= std::numbers::e)) throw DomainError("right_envelope_fit: window must start at x >= e");
    if (!(x_hi > x_lo) || x_hi > gr.x_max) throw DomainError("right_envelope_fit: bad window");
    RightProfile p;
    p.x_lo = x_lo;
    p.x_hi = x_hi;
    for (std::size_t i = 0; i < gr.n_points(); ++i) {
        const double x = gr.node(i);
        if (x < x_lo || x > x_hi) continue;
        const double lf = gr.log_values[i];
        if (!std::isfinite(lf)) continue;
        const double lx = std::log(x);
        const double r = -lf / (x * lx);
        p.ratio.emplace_back(x, r);
        const double below = (1.0 - r) * lx;
        const double above = (r - 1.0) * lx - std::log(lx);
        p.band_constant = std::max({p.band_constant, below, above});
    }
    if (p.ratio.size() < 8) throw DomainError("right_envelope_fit: fewer than 8 usable nodes in the window");
    return p;
}

/// Ratio -ln f(x)/(x ln x) at one point.
inline double right_ratio_at(const DensityGrid& gr, double x) {
    return -gr.log_value_at(x) / (x * std::log(x));
}

struct LimsupRow {
    Side side = Side::left;
    int k = 0;
    double x = 0.0;
    bool excluded = false;  // norm outside (0, 1) or x unusable
    double value = 0.0;     // Lambda_k(x) (left) or R_k(x) (right)
    /// Integrand of mu_k (left) or sigma_k with r(x) = x (right), using the
    /// profile of order k+1; NaN when that profile is absent or excluded.
    double diff = std::numeric_limits<double>::quiet_NaN();
};

/// Finite-x versions of the limsup quantities:
///   Lambda_k(x) = gamma x - ln(-ln ||Fu^(k)||_x)
///   mu_k(x)     = -ln(-ln ||Fu^(k+1)||_x) + ln(-ln ||Fu^(k)||_x)
///   R_k(x)      = (x ln x + ln ||Fbar^(k)||_x) / x
///   sigma_k(x)  = (ln ||Fbar^(k+1)||_x - ln ||Fbar^(k)||_x) / x
inline std::vector<LimsupRow> limsup_proxies(std::span<const NormProfile> profiles) {
    std::vector<LimsupRow> rows;
    auto find = [&](Side side, int k) -> const NormProfile* {
        for (const auto& p : profiles) {
            if (p.side == side && p.k == k) return &p;
        }
        return nullptr;
    };
    auto usable = [](double v) { return v > 0.0 && v < 1.0; };
    for (const auto& p : profiles) {
        const NormProfile* next = find(p.side, p.k + 1);
        if (next && next->xs != p.xs) throw ShapeError("limsup_proxies: profiles must share the x set");
        for (std::size_t i = 0; i < p.xs.size(); ++i) {
            LimsupRow row{p.side, p.k, p.xs[i]};
            const double x = p.xs[i];
            const double v = p.norms[i];
            if (p.side == Side::left) {
                row.excluded = !usable(v);
                if (!row.excluded) {
                    row.value = Constants::gamma * x - std::log(-std::log(v));
                    if (next && usable(next->norms[i])) {
                        row.diff = -std::log(-std::log(next->norms[i])) + std::log(-std::log(v));
                    }
                }
            } else {
                row.excluded = !usable(v) || !(x > 0.0);
                if (!row.excluded) {
                    row.value = (x * std::log(x) + std::log(v)) / x;
                    if (next && next->norms[i] > 0.0) row.diff = (std::log(next->norms[i]) - std::log(v)) / x;
                }
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace qslab
