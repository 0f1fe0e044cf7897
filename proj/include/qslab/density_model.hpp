#pragma once

// Uniform-grid representation of a probability density together with the
// numeric primitives the rest of the library reads it through: quadrature,
// CDF, interpolation, finite-difference derivatives, running minima and tail
// sup norms.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qslab/errors.hpp"

namespace qslab {

enum class Side { left, right };

inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

struct GridMeta {
    std::uint64_t iterations = 0;
    double residual = 0.0;
    double normalization_defect = 0.0;
};

/// Density f sampled at n_points equally spaced nodes on [x_min, x_max].
///
/// `log_values` carries ln f in parallel with `values` so tail analysis can
/// read ln f directly; where f is below the double range only the log is
/// meaningful.
struct DensityGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::vector<double> values;
    std::vector<double> log_values;
    GridMeta meta;

    std::size_t n_points() const noexcept { return values.size(); }
    double spacing() const noexcept { return (x_max - x_min) / static_cast<double>(values.size() - 1); }
    double node(std::size_t i) const noexcept {
        // Endpoint-exact node placement.
        const double t = static_cast<double>(i) / static_cast<double>(values.size() - 1);
        return x_min + (x_max - x_min) * t;
    }
    bool contains(double x) const noexcept { return x >= x_min && x <= x_max; }

    bool same_geometry(const DensityGrid& o) const noexcept {
        return x_min == o.x_min && x_max == o.x_max && n_points() == o.n_points();
    }

    /// Grid filled from f(x); log values are ln f.
    static DensityGrid from_function(double x_min, double x_max, std::size_t n,
                                     const std::function<double(double)>& f) {
        DensityGrid gr = empty(x_min, x_max, n);
        for (std::size_t i = 0; i < n; ++i) {
            gr.values[i] = f(gr.node(i));
            gr.log_values[i] = std::log(gr.values[i]);
        }
        return gr;
    }

    /// Grid filled from ln f(x); useful for planted tails beyond double range.
    static DensityGrid from_log_function(double x_min, double x_max, std::size_t n,
                                         const std::function<double(double)>& log_f) {
        DensityGrid gr = empty(x_min, x_max, n);
        for (std::size_t i = 0; i < n; ++i) {
            gr.log_values[i] = log_f(gr.node(i));
            gr.values[i] = std::exp(gr.log_values[i]);
        }
        return gr;
    }

    static DensityGrid empty(double x_min, double x_max, std::size_t n) {
        if (n < 2) throw DomainError("a grid needs at least 2 points");
        if (!(x_max > x_min)) throw DomainError("grid requires x_max > x_min");
        DensityGrid gr;
        gr.x_min = x_min;
        gr.x_max = x_max;
        gr.values.assign(n, 0.0);
        gr.log_values.assign(n, -std::numeric_limits<double>::infinity());
        return gr;
    }

    /// f at an arbitrary point: linear in log space between positive neighbours,
    /// linear in value space otherwise, 0 outside the grid.
    double value_at(double x) const noexcept {
        if (!(x >= x_min && x <= x_max)) return 0.0;
        const double t = (x - x_min) / spacing();
        auto i = static_cast<std::size_t>(t);
        if (i >= n_points() - 1) i = n_points() - 2;
        const double theta = t - static_cast<double>(i);
        const double a = values[i];
        const double b = values[i + 1];
        if (a > 0.0 && b > 0.0) {
            return std::exp(log_values[i] + theta * (log_values[i + 1] - log_values[i]));
        }
        return a + theta * (b - a);
    }

    /// ln f at an arbitrary grid point, interpolated linearly in log space.
    double log_value_at(double x) const {
        if (!contains(x)) throw DomainError("log_value_at: x outside grid");
        const double t = (x - x_min) / spacing();
        auto i = static_cast<std::size_t>(t);
        if (i >= n_points() - 1) i = n_points() - 2;
        const double theta = t - static_cast<double>(i);
        return log_values[i] + theta * (log_values[i + 1] - log_values[i]);
    }

    // --- persistence -------------------------------------------------------

    static constexpr char kMagic[4] = {'Q', 'S', 'D', 'G'};
    static constexpr std::uint16_t kVersion = 1;

    /// Little-endian binary layout: magic, u16 version, f64 x_min, f64 x_max,
    /// u64 n_points, n f64 values, n f64 log values, u64 iterations,
    /// f64 residual, f64 normalization defect.
    void write_binary(const std::string& path) const {
        static_assert(std::endian::native == std::endian::little);
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot open " + path + " for writing");
        const std::uint64_t n = n_points();
        os.write(kMagic, 4);
        put(os, kVersion);
        put(os, x_min);
        put(os, x_max);
        put(os, n);
        os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        os.write(reinterpret_cast<const char*>(log_values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        put(os, meta.iterations);
        put(os, meta.residual);
        put(os, meta.normalization_defect);
        if (!os) throw IoError("write failed: " + path);
    }

    static DensityGrid read_binary(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open " + path);
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path + ": not a QSDG grid file");
        const auto version = get<std::uint16_t>(is);
        if (version != kVersion) throw IoError(path + ": unsupported grid version " + std::to_string(version));
        DensityGrid gr;
        gr.x_min = get<double>(is);
        gr.x_max = get<double>(is);
        const auto n = get<std::uint64_t>(is);
        if (!is || n < 2 || n > (1ULL << 32)) throw IoError(path + ": bad grid header");
        gr.values.resize(n);
        gr.log_values.resize(n);
        is.read(reinterpret_cast<char*>(gr.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        is.read(reinterpret_cast<char*>(gr.log_values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        gr.meta.iterations = get<std::uint64_t>(is);
        gr.meta.residual = get<double>(is);
        gr.meta.normalization_defect = get<double>(is);
        if (!is) throw IoError(path + ": truncated grid file");
        return gr;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"format", "QSDG"},
                              {"version", kVersion},
                              {"x_min", x_min},
                              {"x_max", x_max},
                              {"n_points", n_points()},
                              {"values", values},
                              {"log_values", log_values},
                              {"meta",
                               {{"iterations", meta.iterations},
                                {"residual", meta.residual},
                                {"normalization_defect", meta.normalization_defect}}}};
    }

    static DensityGrid from_json(const nlohmann::json& j) {
        DensityGrid gr;
        gr.x_min = j.at("x_min").get<double>();
        gr.x_max = j.at("x_max").get<double>();
        gr.values = j.at("values").get<std::vector<double>>();
        gr.log_values = j.at("log_values").get<std::vector<double>>();
        if (gr.values.size() != j.at("n_points").get<std::size_t>() || gr.log_values.size() != gr.values.size()) {
            throw ShapeError("grid JSON: n_points does not match the value arrays");
        }
        const auto& m = j.at("meta");
        gr.meta = {m.at("iterations").get<std::uint64_t>(), m.at("residual").get<double>(),
                   m.at("normalization_defect").get<double>()};
        return gr;
    }

private:
    template <class T>
    static void put(std::ostream& os, const T& v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <class T>
    static T get(std::istream& is) {
        T v{};
        is.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
};

/// Running trapezoid integrals of a grid, from both ends.
///
/// Left cumulative sums give F accurately in the left tail; right cumulative
/// sums give 1 - F without cancellation in the right tail.
class GridCdf {
public:
    explicit GridCdf(const DensityGrid& gr) : grid_(&gr) {
        const std::size_t n = gr.n_points();
        const double h = gr.spacing();
        from_left_.assign(n, 0.0);
        from_right_.assign(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            from_left_[i] = from_left_[i - 1] + 0.5 * h * (gr.values[i - 1] + gr.values[i]);
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            from_right_[i] = from_right_[i + 1] + 0.5 * h * (gr.values[i] + gr.values[i + 1]);
        }
    }

    double total() const noexcept { return from_left_.back(); }

    /// Trapezoid integral of the piecewise-linear interpolant over [x_min, x].
    double integral_to(double x) const {
        const auto [i, partial] = locate(x);
        return from_left_[i] + partial;
    }

    /// Trapezoid integral of the piecewise-linear interpolant over [x, x_max].
    double integral_from(double x) const {
        const auto [i, partial] = locate(x);
        return from_right_[i] - partial;
    }

    double cdf(double x) const { return std::clamp(integral_to(x), 0.0, 1.0); }
    double survival(double x) const { return std::clamp(integral_from(x), 0.0, 1.0); }

private:
    // Node index i with x in [x_i, x_{i+1}] and the integral over [x_i, x].
    std::pair<std::size_t, double> locate(double x) const {
        const DensityGrid& gr = *grid_;
        if (!(x >= gr.x_min && x <= gr.x_max)) throw DomainError("integration endpoint outside grid");
        const double h = gr.spacing();
        const double t = (x - gr.x_min) / h;
        auto i = static_cast<std::size_t>(t);
        if (i >= gr.n_points() - 1) i = gr.n_points() - 2;
        const double s = (t - static_cast<double>(i)) * h;
        const double fa = gr.values[i];
        const double fb = gr.values[i + 1];
        return {i, s * fa + 0.5 * s * s * (fb - fa) / h};
    }

    const DensityGrid* grid_;
    std::vector<double> from_left_;
    std::vector<double> from_right_;
};

/// Composite-trapezoid integral of f over [a, b].
inline double integrate(const DensityGrid& gr, double a, double b) {
    if (!(gr.x_min <= a && a <= b && b <= gr.x_max)) {
        throw DomainError("integrate requires x_min <= a <= b <= x_max");
    }
    const GridCdf c(gr);
    return c.integral_to(b) - c.integral_to(a);
}

inline double cdf(const DensityGrid& gr, double x) { return GridCdf(gr).cdf(x); }

/// Trapezoid integral of f over the whole grid.
inline double total_mass(const DensityGrid& gr) {
    double s = 0.5 * (gr.values.front() + gr.values.back());
    for (std::size_t i = 1; i + 1 < gr.n_points(); ++i) s += gr.values[i];
    return s * gr.spacing();
}

struct GridMoments {
    double mass = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

inline GridMoments moments(const DensityGrid& gr) {
    const double h = gr.spacing();
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < gr.n_points(); ++i) {
        const double w = (i == 0 || i + 1 == gr.n_points()) ? 0.5 * h : h;
        m0 += w * gr.values[i];
        m1 += w * gr.values[i] * gr.node(i);
    }
    const double mean = m1 / m0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < gr.n_points(); ++i) {
        const double w = (i == 0 || i + 1 == gr.n_points()) ? 0.5 * h : h;
        const double d = gr.node(i) - mean;
        m2 += w * gr.values[i] * d * d;
    }
    return {m0, mean, m2 / m0};
}

/// Running minimum of f from 0 into one tail.
///
/// Left: (min of f over [-z, 0]) capped at 1. Right: min of f over [0, z],
/// uncapped. The minimum of the interpolant is taken over the interval
/// endpoints and the nodes strictly inside.
inline double tail_min(const DensityGrid& gr, Side side, double z) {
    if (!(z >= 0.0)) throw DomainError("tail_min requires z >= 0");
    const double lo = side == Side::left ? -z : 0.0;
    const double hi = side == Side::left ? 0.0 : z;
    if (!gr.contains(lo) || !gr.contains(hi)) {
        throw DomainError("tail_min: z = " + std::to_string(z) + " is beyond the grid on the " + to_string(side));
    }
    double m = std::min(gr.value_at(lo), gr.value_at(hi));
    const double h = gr.spacing();
    auto first = static_cast<std::size_t>(std::ceil((lo - gr.x_min) / h));
    for (std::size_t i = first; i < gr.n_points() && gr.node(i) <= hi; ++i) {
        if (gr.node(i) >= lo) m = std::min(m, gr.values[i]);
    }
    return side == Side::left ? std::min(m, 1.0) : m;
}

/// ln of the uncapped running minimum, read from log values so it stays
/// finite where f itself is below the double range.
inline double log_tail_min(const DensityGrid& gr, Side side, double z) {
    if (!(z >= 0.0)) throw DomainError("tail_min requires z >= 0");
    const double lo = side == Side::left ? -z : 0.0;
    const double hi = side == Side::left ? 0.0 : z;
    if (!gr.contains(lo) || !gr.contains(hi)) {
        throw DomainError("tail_min: z = " + std::to_string(z) + " is beyond the grid on the " + to_string(side));
    }
    double m = std::min(gr.log_value_at(lo), gr.log_value_at(hi));
    const auto first = static_cast<std::size_t>(std::ceil((lo - gr.x_min) / gr.spacing()));
    for (std::size_t i = first; i < gr.n_points() && gr.node(i) <= hi; ++i) {
        if (gr.node(i) >= lo) m = std::min(m, gr.log_values[i]);
    }
    return m;
}

/// Finite-difference weights for the `order`-th derivative at x0 from the
/// given abscissae (Fornberg's recursion).
inline std::vector<double> fd_weights(double x0, std::span<const double> xs, int order) {
    const int n = static_cast<int>(xs.size()) - 1;
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n + 1), std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) w[i] = c[i][order];
    return w;
}

/// k-th derivative of a grid function on the same nodes.
struct DerivativeTable {
    double x_min = 0.0;
    double x_max = 1.0;
    int order = 0;
    std::vector<double> values;
    /// Nodes within `margin` of either end use one-sided stencils and are not
    /// read by the norm routines.
    std::size_t margin = 0;

    std::size_t n_points() const noexcept { return values.size(); }
    double spacing() const noexcept { return (x_max - x_min) / static_cast<double>(values.size() - 1); }
    double node(std::size_t i) const noexcept {
        return x_min + (x_max - x_min) * (static_cast<double>(i) / static_cast<double>(values.size() - 1));
    }
    bool valid(std::size_t i) const noexcept { return i >= margin && i + margin < values.size(); }

    double value_at(double x) const {
        const double t = (x - x_min) / spacing();
        auto i = static_cast<std::size_t>(std::max(0.0, t));
        if (i >= n_points() - 1) i = n_points() - 2;
        const double theta = t - static_cast<double>(i);
        return values[i] + theta * (values[i + 1] - values[i]);
    }
};

inline constexpr int kMaxDerivativeOrder = 6;

/// O(h^2) finite-difference derivative: centred stencils of 2*floor((k+1)/2)+1
/// points in the interior, one-sided (k+2)-point stencils near the ends.
inline DerivativeTable derivative(std::span<const double> values, double x_min, double x_max, int k) {
    if (k < 1) throw UnsupportedOrder("derivative order must be >= 1");
    if (k > kMaxDerivativeOrder) {
        throw UnsupportedOrder("derivative order " + std::to_string(k) + " exceeds k_max = " +
                               std::to_string(kMaxDerivativeOrder));
    }
    const std::size_t n = values.size();
    if (n < static_cast<std::size_t>(2 * k + 1)) throw DomainError("grid too small for derivative order");
    const double h = (x_max - x_min) / static_cast<double>(n - 1);
    const int half = (k + 1) / 2;
    const int width_c = 2 * half + 1;
    const int width_s = k + 2;

    auto stencil = [&](int offset_first, int width, int at) {
        std::vector<double> xs(static_cast<std::size_t>(width));
        for (int j = 0; j < width; ++j) xs[j] = static_cast<double>(offset_first + j);
        auto w = fd_weights(static_cast<double>(at), xs, k);
        const double scale = std::pow(h, -k);
        for (double& v : w) v *= scale;
        return w;
    };
    const auto centre = stencil(-half, width_c, 0);

    DerivativeTable d{x_min, x_max, k, std::vector<double>(n, 0.0), static_cast<std::size_t>(k)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<std::ptrdiff_t>(i);
        if (ii >= half && ii + half < static_cast<std::ptrdiff_t>(n)) {
            double s = 0.0;
            for (int j = 0; j < width_c; ++j) s += centre[j] * values[i - half + j];
            d.values[i] = s;
        } else {
            // one-sided window clipped to the grid
            std::ptrdiff_t first = ii < half ? 0 : static_cast<std::ptrdiff_t>(n) - width_s;
            const auto w = stencil(0, width_s, static_cast<int>(ii - first));
            double s = 0.0;
            for (int j = 0; j < width_s; ++j) s += w[j] * values[first + j];
            d.values[i] = s;
        }
    }
    return d;
}

inline DerivativeTable derivative(const DensityGrid& gr, int k) {
    return derivative(gr.values, gr.x_min, gr.x_max, k);
}

/// Tabulated tail sup norm x -> ||h||_x = sup_{t >= x} |h(t)|.
struct NormProfile {
    int k = 0;
    Side side = Side::right;
    std::vector<double> xs;
    std::vector<double> norms;
};

/// ||Fu^(k)||_x (left) or ||Fbar^(k)||_x (right) at each x in xs, where
/// Fu(t) = F(-t) and Fbar(t) = 1 - F(t). For k >= 1, |h(t)| = |f^(k-1)(-t)|
/// (left) or |f^(k-1)(t)| (right). The sup runs over x itself (interpolated)
/// and every valid node beyond it.
inline NormProfile tail_sup_norm(const DensityGrid& gr, int k, Side side, std::span<const double> xs) {
    if (k < 0) throw DomainError("norm order must be nonnegative");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] >= 0.0)) throw DomainError("tail_sup_norm: x must be nonnegative");
        if (i > 0 && !(xs[i] > xs[i - 1])) throw DomainError("tail_sup_norm: xs must be increasing");
    }
    NormProfile p{k, side, {xs.begin(), xs.end()}, std::vector<double>(xs.size(), 0.0)};
    const std::size_t n = gr.n_points();

    // |h| at each node in grid order, plus a validity flag.
    std::vector<double> h(n);
    std::vector<char> ok(n, 1);
    std::function<double(double)> h_at;
    GridCdf cdfs(gr);
    DerivativeTable dt;
    if (k == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = side == Side::left ? cdfs.integral_to(gr.node(i)) : cdfs.integral_from(gr.node(i));
        }
        h_at = [&](double t) { return side == Side::left ? cdfs.integral_to(t) : cdfs.integral_from(t); };
    } else if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) h[i] = gr.values[i];
        h_at = [&](double t) { return gr.value_at(t); };
    } else {
        dt = derivative(gr, k - 1);
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = std::fabs(dt.values[i]);
            ok[i] = dt.valid(i) ? 1 : 0;
        }
        h_at = [&](double t) { return std::fabs(dt.value_at(t)); };
    }

    // Walk outward from the far end of the tail accumulating the running max.
    const double hsp = gr.spacing();
    double running = 0.0;
    bool any = false;
    if (side == Side::right) {
        std::size_t i = n;
        for (std::size_t q = xs.size(); q-- > 0;) {
            const double x = xs[q];
            if (!gr.contains(x)) throw DomainError("tail_sup_norm: x beyond the right end of the grid");
            while (i > 0 && gr.node(i - 1) > x) {
                --i;
                if (ok[i]) {
                    running = std::max(running, h[i]);
                    any = true;
                }
            }
            const auto at = static_cast<std::size_t>((x - gr.x_min) / hsp);
            const bool x_ok = ok[std::min(at, n - 1)] && ok[std::min(at + 1, n - 1)];
            if (!any && !x_ok) throw DomainError("tail_sup_norm: empty tail window");
            p.norms[q] = x_ok ? std::max(running, h_at(x)) : running;
        }
    } else {
        std::size_t i = 0;
        for (std::size_t q = xs.size(); q-- > 0;) {
            const double x = xs[q];
            if (!gr.contains(-x)) throw DomainError("tail_sup_norm: x beyond the left end of the grid");
            while (i < n && gr.node(i) < -x) {
                if (ok[i]) {
                    running = std::max(running, h[i]);
                    any = true;
                }
                ++i;
            }
            const auto at = static_cast<std::size_t>((-x - gr.x_min) / hsp);
            const bool x_ok = ok[std::min(at, n - 1)] && ok[std::min(at + 1, n - 1)];
            if (!any && !x_ok) throw DomainError("tail_sup_norm: empty tail window");
            p.norms[q] = x_ok ? std::max(running, h_at(-x)) : running;
        }
    }
    return p;
}

/// Number of sign changes of f' over the valid nodes, ignoring |f'| below `floor`.
inline int derivative_sign_changes(const DensityGrid& gr, double floor = 1e-8) {
    const auto d = derivative(gr, 1);
    int changes = 0;
    int last = 0;
    for (std::size_t i = 0; i < d.n_points(); ++i) {
        if (!d.valid(i) || std::fabs(d.values[i]) < floor) continue;
        const int s = d.values[i] > 0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

}  // namespace qslab
