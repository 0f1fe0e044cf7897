#pragma once

// Derivative-order bounds: Landau-Kolmogorov checks, |phi| decay, sup |f^(k)|.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"

#include "qslab/density_model.hpp"
#include "qslab/errors.hpp"

namespace qslab {

/// (e^2 n / (4k))^k, valid for n >= 2 and 1 <= k <= n/2.
inline double lk_bound(int n, int k) {
    if (n < 2) throw DomainError("lk_bound: n must be >= 2");
    if (k < 1 || 2 * k > n) throw std::out_of_range("lk_bound: requires 1 <= k <= n/2");
    const double e2 = std::numbers::e * std::numbers::e;
    return std::pow(e2 * n / (4.0 * k), k);
}

struct LkRow {
    double x = 0.0;
    double norm_h = 0.0;
    double norm_k = 0.0;
    double norm_n = 0.0;
    double lhs = 0.0;    // ||h^(k)||_x
    double rhs = 0.0;    // slack * c * ||h||^{1-k/n} ||h^(n)||^{k/n}
    double ratio = 0.0;  // lhs / rhs
    bool pass = false;
};

struct LkReport {
    Side side = Side::right;
    int n = 2;
    int k = 1;
    double slack = 1.0;
    double constant = 0.0;
    std::vector<LkRow> rows;
    double worst_ratio = 0.0;
    bool pass = true;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& w : rows) {
            r.push_back({{"x", w.x}, {"norm_h", w.norm_h}, {"norm_k", w.norm_k}, {"norm_n", w.norm_n},
                         {"lhs", w.lhs}, {"rhs", w.rhs}, {"ratio", w.ratio}, {"pass", w.pass}});
        }
        return {{"side", to_string(side)}, {"n", n},          {"k", k},        {"slack", slack},
                {"constant", constant},    {"worst_ratio", worst_ratio}, {"pass", pass}, {"rows", r}};
    }
};

/// The LK inequality for one x given the three tail norms.
inline LkRow lk_check(int n, int k, double x, double norm_h, double norm_k, double norm_n, double slack) {
    const double c = lk_bound(n, k);
    const double q = static_cast<double>(k) / n;
    LkRow r{x, norm_h, norm_k, norm_n, norm_k, slack * c * std::pow(norm_h, 1.0 - q) * std::pow(norm_n, q)};
    r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : (r.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.pass = r.lhs <= r.rhs;
    return r;
}

inline void finish(LkReport& rep) {
    rep.worst_ratio = 0.0;
    rep.pass = true;
    for (const auto& r : rep.rows) {
        rep.worst_ratio = std::max(rep.worst_ratio, r.ratio);
        rep.pass = rep.pass && r.pass;
    }
}

/// LK check for h = Fu (left) or Fbar (right) built from the grid.
inline LkReport verify_lk(const DensityGrid& gr, Side side, int k, int n, std::span<const double> xs,
                          double slack = 1.1) {
    if (k < 1 || 2 * k > n) throw std::out_of_range("verify_lk: requires 1 <= k <= n/2");
    if (n > kMaxDerivativeOrder) throw UnsupportedOrder("verify_lk: n exceeds the derivative order cap");
    if (xs.empty()) throw DomainError("verify_lk: empty x set");
    LkReport rep{side, n, k, slack, lk_bound(n, k)};
    const auto p0 = tail_sup_norm(gr, 0, side, xs);
    const auto pk = tail_sup_norm(gr, k, side, xs);
    const auto pn = tail_sup_norm(gr, n, side, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        rep.rows.push_back(lk_check(n, k, xs[i], p0.norms[i], pk.norms[i], pn.norms[i], slack));
    }
    finish(rep);
    return rep;
}

/// sup_{t >= x} |h^(j)(t)| for a tabulated h (j = 0 reads the table itself).
/// Used for planted functions where h is given directly rather than as a
/// tail distribution function.
inline std::vector<double> table_sup_norm(std::span<const double> values, double x_min, double x_max, int j,
                                          std::span<const double> xs) {
    DerivativeTable d;
    if (j == 0) {
        d = DerivativeTable{x_min, x_max, 0, {values.begin(), values.end()}, 0};
    } else {
        d = derivative(values, x_min, x_max, j);
    }
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) {
        if (x < x_min || x > x_max) throw DomainError("table_sup_norm: x outside the table");
        double s = std::fabs(d.value_at(x));
        bool any = d.valid(std::min(d.n_points() - 1, static_cast<std::size_t>((x - x_min) / d.spacing())));
        for (std::size_t i = 0; i < d.n_points(); ++i) {
            if (d.node(i) < x || !d.valid(i)) continue;
            s = std::max(s, std::fabs(d.values[i]));
            any = true;
        }
        if (!any) throw DomainError("table_sup_norm: empty tail window");
        out.push_back(s);
    }
    return out;
}

inline LkReport verify_lk_table(std::span<const double> values, double x_min, double x_max, int k, int n,
                                std::span<const double> xs, double slack = 1.0) {
    if (k < 1 || 2 * k > n) throw std::out_of_range("verify_lk: requires 1 <= k <= n/2");
    LkReport rep{Side::right, n, k, slack, lk_bound(n, k)};
    const auto a = table_sup_norm(values, x_min, x_max, 0, xs);
    const auto b = table_sup_norm(values, x_min, x_max, k, xs);
    const auto c = table_sup_norm(values, x_min, x_max, n, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) rep.rows.push_back(lk_check(n, k, xs[i], a[i], b[i], c[i], slack));
    finish(rep);
    return rep;
}

/// c_{k,1}^{-k} ||h||^{-(k-1)} ||h'||^k with c_{k,1} <= e^2 k / 4. With
/// ||h'||_x >= f(-+x) this is the lower bound on ||h^(k)||_x.
inline double lk_lower_bound(int k, double norm_h, double norm_1) {
    if (k < 2) throw DomainError("lk_lower_bound: k must be >= 2");
    const double c = lk_bound(k, 1);
    return std::pow(c, -k) * std::pow(norm_h, -(k - 1)) * std::pow(norm_1, k);
}

struct LkLowerBound {
    Side side = Side::right;
    int k = 2;
    double x = 0.0;
    double bound = 0.0;
    double norm_k = 0.0;
    double slack = 1.1;
    bool pass = false;

    nlohmann::ordered_json to_json() const {
        return {{"side", to_string(side)}, {"k", k},         {"x", x},         {"bound", bound},
                {"norm_k", norm_k},        {"slack", slack}, {"pass", pass}};
    }
};

inline LkLowerBound lower_bound_from_lk(const DensityGrid& gr, Side side, int k, double x, double slack = 1.1) {
    if (k < 2) throw DomainError("lower_bound_from_lk: k must be >= 2");
    const double xs[] = {x};
    const double norm_h = tail_sup_norm(gr, 0, side, xs).norms[0];
    const double norm_k = tail_sup_norm(gr, k, side, xs).norms[0];
    const double fx = gr.value_at(side == Side::left ? -x : x);
    LkLowerBound r{side, k, x, lk_lower_bound(k, norm_h, fx), norm_k, slack};
    r.pass = slack * norm_k >= r.bound;
    return r;
}

struct PhiTable {
    std::vector<double> ts;
    std::vector<double> phi_abs;

    void write_csv(std::ostream& os) const {
        os << "t,abs_phi\n";
        os.precision(17);
        for (std::size_t i = 0; i < ts.size(); ++i) os << ts[i] << ',' << phi_abs[i] << '\n';
    }
};

inline double nyquist(const DensityGrid& gr) { return std::numbers::pi / gr.spacing(); }

/// |int e^{itx} f(x) dx| by the trapezoid rule on the grid nodes.
inline PhiTable phi_from_grid(const DensityGrid& gr, std::span<const double> ts) {
    const double tmax = nyquist(gr);
    const double h = gr.spacing();
    PhiTable p{{ts.begin(), ts.end()}, {}};
    p.phi_abs.reserve(ts.size());
    for (double t : ts) {
        if (!std::isfinite(t)) throw DomainError("phi_from_grid: t must be finite");
        if (std::fabs(t) > tmax) throw AliasingError("phi_from_grid: |t| exceeds the grid Nyquist limit pi/h");
        double re = 0.0, im = 0.0;
        const std::size_t n = gr.n_points();
        for (std::size_t i = 0; i < n; ++i) {
            const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
            const double a = t * gr.node(i);
            re += w * gr.values[i] * std::cos(a);
            im += w * gr.values[i] * std::sin(a);
        }
        p.phi_abs.push_back(h * std::hypot(re, im));
    }
    return p;
}

/// 2^{p^2 + 6p} |t|^{-p}.
inline double phi_decay_bound(int p, double t) {
    return std::exp2(static_cast<double>(p * p + 6 * p)) * std::pow(std::fabs(t), -p);
}

/// 2^{k^2 + 10k + 17}; +infinity for k > 40.
inline double fk_sup_bound(int k) {
    if (k < 0) throw DomainError("fk_sup_bound: k must be nonnegative");
    if (k > 40) return std::numeric_limits<double>::infinity();
    return std::exp2(static_cast<double>(k * k + 10 * k + 17));
}

/// Largest |f^(k)| over valid grid nodes (k = 0 reads f).
inline double grid_sup_derivative(const DensityGrid& gr, int k) {
    double s = 0.0;
    if (k == 0) {
        for (double v : gr.values) s = std::max(s, std::fabs(v));
        return s;
    }
    const auto d = derivative(gr, k);
    for (std::size_t i = 0; i < d.n_points(); ++i) {
        if (d.valid(i)) s = std::max(s, std::fabs(d.values[i]));
    }
    return s;
}

struct PowerOfTwo {
    long long log2 = 0;
    double value = 0.0;  // +infinity when beyond the double range
};

/// a_{n,k} = 2^{(k+n-1)^2 + 10(k+n-1) + 17}.
inline PowerOfTwo a_nk(int n, int k) {
    if (n < 2 || k < 0) throw DomainError("a_nk: requires n >= 2, k >= 0");
    const long long m = static_cast<long long>(k) + n - 1;
    const long long e = m * m + 10 * m + 17;
    return {e, e > 1023 ? std::numeric_limits<double>::infinity() : std::ldexp(1.0, static_cast<int>(e))};
}

}  // namespace qslab
