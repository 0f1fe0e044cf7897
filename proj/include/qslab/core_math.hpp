#pragma once

// Closed-form scalars of the QuickSort limit law and exact finite-n moments
// of the comparison count X_n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "qslab/errors.hpp"

namespace qslab {

struct Constants {
    /// Left-tail rate (2 - 1/ln 2)^{-1}.
    static constexpr double gamma = 1.0 / (2.0 - 1.0 / std::numbers::ln2);
    static constexpr double ln2_inv = 1.0 / std::numbers::ln2;
    /// Var Z = 7 - 2 pi^2 / 3.
    static constexpr double var_z = 7.0 - 2.0 * std::numbers::pi * std::numbers::pi / 3.0;
};

static_assert(Constants::var_z > 0.42 && Constants::var_z < 0.4204);

/// Toll function g(u) = 2u ln u + 2(1-u) ln(1-u) + 1 on the open interval (0,1).
inline double g(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("g(u) requires 0 < u < 1, got " + std::to_string(u));
    }
    return 2.0 * u * std::log(u) + 2.0 * (1.0 - u) * std::log1p(-u) + 1.0;
}

/// a(eps) = -g(1/2 - eps), the left-tail step length.
inline double left_step(double eps) { return -g(0.5 - eps); }

inline mpq_class harmonic(std::uint64_t n) {
    if (n == 0) throw DomainError("harmonic(n) requires n >= 1");
    mpq_class h = 0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        h += mpq_class(1, static_cast<unsigned long>(k));
    }
    h.canonicalize();
    return h;
}

/// E X_n = 2(n+1)H_n - 4n, with E X_0 = E X_1 = 0.
inline mpq_class exact_mean(std::uint64_t n) {
    if (n <= 1) return mpq_class(0);
    mpq_class m = 2 * mpq_class(static_cast<unsigned long>(n + 1)) * harmonic(n) -
                  4 * mpq_class(static_cast<unsigned long>(n));
    m.canonicalize();
    return m;
}

inline double exact_mean_double(std::uint64_t n) {
    if (n <= 1) return 0.0;
    // Float path: harmonic sum from the small end keeps rounding at O(n eps).
    long double h = 0.0L;
    for (std::uint64_t k = n; k >= 1; --k) h += 1.0L / static_cast<long double>(k);
    return static_cast<double>(2.0L * static_cast<long double>(n + 1) * h -
                               4.0L * static_cast<long double>(n));
}

/// Mean and variance of X_n for n = 0..n_max.
///
/// When `exact` is set, `mean_q`/`variance_q` hold the rational values and the
/// double columns are their roundings. Otherwise only the double columns exist.
struct MomentTable {
    bool exact = false;
    std::vector<std::uint64_t> n;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<mpq_class> mean_q;
    std::vector<mpq_class> variance_q;

    std::size_t size() const noexcept { return n.size(); }

    /// CSV with header `n,mean,variance`; exact rows render as `p/q`.
    void write_csv(std::ostream& os) const {
        os << "n,mean,variance\n";
        for (std::size_t i = 0; i < n.size(); ++i) {
            os << n[i] << ',';
            if (exact) {
                os << mean_q[i].get_str() << ',' << variance_q[i].get_str() << '\n';
            } else {
                os << format_double(mean[i]) << ',' << format_double(variance[i]) << '\n';
            }
        }
    }

    static std::string format_double(double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    }
};

namespace detail {

// Neumaier compensated accumulator.
struct CompensatedSum {
    long double sum = 0.0L;
    long double comp = 0.0L;

    void add(long double v) {
        const long double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    long double value() const { return sum + comp; }
};

inline MomentTable exact_moments(std::uint64_t n_max) {
    MomentTable t;
    t.exact = true;
    const std::size_t count = n_max + 1;
    t.n.resize(count);
    t.mean_q.resize(count);
    t.variance_q.resize(count);

    mpz_class lcm = 1;
    for (std::uint64_t k = 2; k <= n_max; ++k) {
        mpz_lcm_ui(lcm.get_mpz_t(), lcm.get_mpz_t(), static_cast<unsigned long>(k));
    }
    const mpq_class lcm_sq = mpq_class(lcm * lcm);

    // scaled[k] = lcm * E X_k, an integer because H_k has denominator dividing lcm(1..k).
    std::vector<mpz_class> scaled(count);
    std::vector<mpq_class> second(count);
    mpq_class sum_mean = 0;    // sum_{k<n} E X_k
    mpq_class sum_second = 0;  // sum_{k<n} E X_k^2
    for (std::uint64_t m = 0; m <= n_max; ++m) {
        mpq_class mean = 0;
        mpq_class sec = 0;
        if (m >= 2) {
            const mpq_class nq(static_cast<unsigned long>(m));
            mean = mpq_class(static_cast<unsigned long>(m - 1)) + 2 * sum_mean / nq;
            mean.canonicalize();

            // sum_{i=1}^{m} E X_{i-1} E X_{m-i}, folded by symmetry.
            mpz_class cross = 0;
            for (std::uint64_t i = 0; i < m / 2; ++i) {
                mpz_addmul(cross.get_mpz_t(), scaled[i].get_mpz_t(), scaled[m - 1 - i].get_mpz_t());
            }
            cross *= 2;
            if (m % 2 == 1) {
                const auto mid = (m - 1) / 2;
                mpz_addmul(cross.get_mpz_t(), scaled[mid].get_mpz_t(), scaled[mid].get_mpz_t());
            }
            const mpq_class cross_q = mpq_class(cross) / lcm_sq;
            const mpq_class toll(static_cast<unsigned long>(m - 1));
            sec = (2 * sum_second + nq * toll * toll + 2 * cross_q + 4 * toll * sum_mean) / nq;
            sec.canonicalize();
        }
        mpq_class sc = mean * lcm;
        sc.canonicalize();
        if (sc.get_den() != 1) throw NumericalFailure("scaled mean is not integral");
        scaled[m] = sc.get_num();

        t.n[m] = m;
        t.mean_q[m] = mean;
        mpq_class var = sec - mean * mean;
        var.canonicalize();
        t.variance_q[m] = var;
        second[m] = sec;
        sum_mean += mean;
        sum_second += sec;
    }
    t.mean.resize(count);
    t.variance.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        t.mean[i] = t.mean_q[i].get_d();
        t.variance[i] = t.variance_q[i].get_d();
    }
    return t;
}

inline MomentTable float_moments(std::uint64_t n_max) {
    MomentTable t;
    const std::size_t count = n_max + 1;
    t.n.resize(count);
    t.mean.resize(count);
    t.variance.resize(count);
    std::vector<long double> mean(count, 0.0L);
    CompensatedSum sum_mean, sum_second;
    for (std::uint64_t m = 0; m <= n_max; ++m) {
        long double sec = 0.0L;
        if (m >= 2) {
            const auto nl = static_cast<long double>(m);
            const auto toll = static_cast<long double>(m - 1);
            mean[m] = toll + 2.0L * sum_mean.value() / nl;
            CompensatedSum cross;
            for (std::uint64_t i = 0; i < m / 2; ++i) cross.add(2.0L * mean[i] * mean[m - 1 - i]);
            if (m % 2 == 1) {
                const auto mid = (m - 1) / 2;
                cross.add(mean[mid] * mean[mid]);
            }
            sec = (2.0L * sum_second.value() + nl * toll * toll + 2.0L * cross.value() +
                   4.0L * toll * sum_mean.value()) /
                  nl;
        }
        t.n[m] = m;
        t.mean[m] = static_cast<double>(mean[m]);
        t.variance[m] = static_cast<double>(sec - mean[m] * mean[m]);
        sum_mean.add(mean[m]);
        sum_second.add(sec);
    }
    return t;
}

}  // namespace detail

/// Exact first and second moments of X_n for n = 0..n_max, from the pivot-rank
/// recurrence X_n = X_{U-1} + X*_{n-U} + n - 1 with independent subproblems.
/// Rational arithmetic up to `exact_limit`; a compensated long double path above it.
inline MomentTable exact_variance_table(std::uint64_t n_max, std::uint64_t exact_limit = 2000) {
    if (n_max < 1) throw DomainError("exact_variance_table requires n_max >= 1");
    return n_max <= exact_limit ? detail::exact_moments(n_max) : detail::float_moments(n_max);
}

struct ElementaryCheck {
    std::string family;  // shift_bound, delta_bound, step_bound, toll_log_bound
    double param = 0.0;  // eps, or delta for toll_log_bound
    double lhs = 0.0;    // the side that must be >= rhs
    double rhs = 0.0;
    bool pass = false;
};

/// Pointwise checks of the elementary inequalities used in the tail lemmas:
///   toll_log_bound: g(delta) >= 1 + 3 delta ln delta
///   delta_bound:    19 eps^2 >= (2 eps/(1-eps)) |2 ln(1 - 4 eps/(1+2 eps))|
///   step_bound:     a(eps) >= 30 eps^2
///   shift_bound:    min over u in [1/2-eps/2, 1/2] of (-a(eps)-g(u))/(1-u) >= eps^2
inline std::vector<ElementaryCheck> check_elementary_inequalities(std::span<const double> eps_grid,
                                                                  std::span<const double> delta_grid,
                                                                  int shift_samples = 65) {
    for (double e : eps_grid) {
        if (!(e > 0.0 && e < 0.1)) throw DomainError("eps must lie in (0, 1/10), got " + std::to_string(e));
    }
    for (double d : delta_grid) {
        if (!(d > 0.0 && d < 0.5)) throw DomainError("delta must lie in (0, 1/2), got " + std::to_string(d));
    }
    std::vector<ElementaryCheck> out;
    out.reserve(3 * eps_grid.size() + delta_grid.size());
    for (double d : delta_grid) {
        const double lhs = g(d);
        const double rhs = 1.0 + 3.0 * d * std::log(d);
        out.push_back({"toll_log_bound", d, lhs, rhs, lhs >= rhs});
    }
    for (double e : eps_grid) {
        const double shift =
            (2.0 * e / (1.0 - e)) * std::fabs(2.0 * std::log1p(-4.0 * e / (1.0 + 2.0 * e)));
        out.push_back({"delta_bound", e, 19.0 * e * e, shift, 19.0 * e * e >= shift});

        const double a = left_step(e);
        out.push_back({"step_bound", e, a, 30.0 * e * e, a >= 30.0 * e * e});

        double worst = std::numeric_limits<double>::infinity();
        for (int i = 0; i < shift_samples; ++i) {
            const double u = 0.5 - 0.5 * e * static_cast<double>(i) / (shift_samples - 1);
            worst = std::min(worst, (-a - g(u)) / (1.0 - u));
        }
        out.push_back({"shift_bound", e, worst, e * e, worst >= e * e});
    }
    return out;
}

}  // namespace qslab
