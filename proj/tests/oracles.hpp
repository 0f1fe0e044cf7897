#pragma once

// Independent reference computations used by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include <gmpxx.h>

namespace oracle {

// Comparisons made by textbook quicksort (first element as pivot, every other
// element compared with it once) on one permutation.
inline std::uint64_t quicksort_comparisons(std::vector<int> a) {
    if (a.size() < 2) return 0;
    const int pivot = a.front();
    std::vector<int> lo, hi;
    for (std::size_t i = 1; i < a.size(); ++i) (a[i] < pivot ? lo : hi).push_back(a[i]);
    return (a.size() - 1) + quicksort_comparisons(lo) + quicksort_comparisons(hi);
}

// Law of X_n by running quicksort over all n! permutations: count -> multiplicity.
inline std::map<std::uint64_t, std::uint64_t> enumerate_law(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    std::map<std::uint64_t, std::uint64_t> law;
    do {
        ++law[quicksort_comparisons(p)];
    } while (std::next_permutation(p.begin(), p.end()));
    return law;
}

struct ExactMoments {
    mpq_class mean;
    mpq_class variance;
};

inline ExactMoments enumerate_moments(int n) {
    const auto law = enumerate_law(n);
    mpz_class total = 0, s1 = 0, s2 = 0;
    for (const auto& [x, m] : law) {
        total += m;
        s1 += mpz_class(m) * x;
        s2 += mpz_class(m) * x * x;
    }
    mpq_class mean(s1, total), second(s2, total);
    mean.canonicalize();
    second.canonicalize();
    mpq_class var = second - mean * mean;
    var.canonicalize();
    return {mean, var};
}

// 2(n+1)H_n - 4n with H_n summed term by term.
inline mpq_class closed_form_mean(std::uint64_t n) {
    mpq_class h = 0;
    for (std::uint64_t k = 1; k <= n; ++k) h += mpq_class(1, static_cast<unsigned long>(k));
    mpq_class r = 2 * mpq_class(static_cast<unsigned long>(n + 1)) * h - 4 * mpq_class(static_cast<unsigned long>(n));
    r.canonicalize();
    return r;
}

// Known closed form Var X_n = 7n^2 - 4(n+1)^2 H_n^(2) - 2(n+1) H_n + 13n.
inline mpq_class closed_form_variance(std::uint64_t n) {
    mpq_class h = 0, h2 = 0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        h += mpq_class(1, static_cast<unsigned long>(k));
        h2 += mpq_class(1, static_cast<unsigned long>(k * k));
    }
    const mpq_class nq(static_cast<unsigned long>(n)), n1(static_cast<unsigned long>(n + 1));
    mpq_class r = 7 * nq * nq - 4 * n1 * n1 * h2 - 2 * n1 * h + 13 * nq;
    r.canonicalize();
    return r;
}

inline long double gamma_constant() { return 1.0L / (2.0L - 1.0L / std::log(2.0L)); }

inline long double var_z() {
    const long double pi = 3.141592653589793238462643383279502884L;
    return 7.0L - 2.0L * pi * pi / 3.0L;
}

inline long double g(long double u) {
    return 2.0L * u * std::log(u) + 2.0L * (1.0L - u) * std::log(1.0L - u) + 1.0L;
}

// Tail sup norms of h(t) = exp(-t^2) and its first two derivatives over t >= x >= 0.
inline double gauss_norm0(double x) { return std::exp(-x * x); }
inline double gauss_norm1(double x) {
    const double t = std::max(x, 1.0 / std::sqrt(2.0));
    return 2.0 * t * std::exp(-t * t);
}
inline double gauss_norm2(double x) {
    // h'' = (4t^2 - 2) e^{-t^2}; |h''| is 2 at t = 0, falls to 0 at t = 1/sqrt 2,
    // peaks again at t = sqrt(3/2) with value 4 e^{-3/2}.
    auto v = [](double t) { return std::fabs((4.0 * t * t - 2.0) * std::exp(-t * t)); };
    const double tp = std::sqrt(1.5);
    return x <= tp ? std::max(v(x), v(tp)) : v(x);
}

}  // namespace oracle
