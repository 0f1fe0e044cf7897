#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fixture.hpp"
#include "oracles.hpp"
#include "qslab/deriv_bounds.hpp"

using namespace qslab;

TEST_CASE("LK constants") {
    const double e2 = std::exp(2.0);
    CHECK(lk_bound(2, 1) == doctest::Approx(e2 / 2.0).epsilon(1e-14));
    CHECK(lk_bound(2, 1) == doctest::Approx(3.6945).epsilon(1e-4));
    CHECK(lk_bound(4, 1) == doctest::Approx(7.3891).epsilon(1e-4));
    CHECK(lk_bound(4, 2) == doctest::Approx(13.650).epsilon(1e-4));
    CHECK_THROWS_AS(lk_bound(4, 3), std::out_of_range);
    CHECK_THROWS_AS(lk_bound(2, 0), std::out_of_range);
    CHECK_THROWS_AS(lk_bound(1, 1), DomainError);
}

TEST_CASE("LK on exp(-t^2) with exact norms") {
    for (double x : {0.0, 0.3, 0.7, 1.0, 1.5}) {
        const auto r = lk_check(2, 1, x, oracle::gauss_norm0(x), oracle::gauss_norm1(x), oracle::gauss_norm2(x), 1.0);
        CHECK(r.pass);
    }
    // Grid norms of the planted table agree with the closed forms.
    const auto tab = DensityGrid::from_function(-1.0, 8.0, 9001, [](double t) { return std::exp(-t * t); });
    const double xs[] = {0.0, 0.5, 1.0, 2.0};
    const auto n0 = table_sup_norm(tab.values, tab.x_min, tab.x_max, 0, xs);
    const auto n1 = table_sup_norm(tab.values, tab.x_min, tab.x_max, 1, xs);
    const auto n2 = table_sup_norm(tab.values, tab.x_min, tab.x_max, 2, xs);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(n0[i] == doctest::Approx(oracle::gauss_norm0(xs[i])).epsilon(1e-6));
        CHECK(n1[i] == doctest::Approx(oracle::gauss_norm1(xs[i])).epsilon(1e-6));
        CHECK(n2[i] == doctest::Approx(oracle::gauss_norm2(xs[i])).epsilon(1e-6));
    }
    const auto rep = verify_lk_table(tab.values, tab.x_min, tab.x_max, 1, 2, xs);
    CHECK(rep.pass);
    CHECK(rep.worst_ratio < 1.0);
    for (int n = 2; n <= 6; ++n) {
        for (int k = 1; 2 * k <= n; ++k) CHECK(verify_lk_table(tab.values, tab.x_min, tab.x_max, k, n, xs).pass);
    }
}

TEST_CASE("LK lower bound: rearrangement agrees with the direct form") {
    // verify_lk with (n = k, k = 1) bounds ||h'|| from above; solving for
    // ||h^(k)|| gives lk_lower_bound. Feed both the same norms.
    for (int k : {2, 3, 4}) {
        const double nh = 0.7, n1 = 0.31;
        const double lb = lk_lower_bound(k, nh, n1);
        // With ||h^(k)|| exactly at the lower bound, the LK right side equals ||h'||.
        const auto r = lk_check(k, 1, 0.0, nh, n1, lb, 1.0);
        CHECK(r.rhs == doctest::Approx(n1).epsilon(1e-9));
    }
    // Planted Gaussian at x = 0 with analytic norms: ||h''|| = 2 exceeds the bound.
    const double bound = lk_lower_bound(2, oracle::gauss_norm0(0.0), oracle::gauss_norm1(0.0));
    CHECK(oracle::gauss_norm2(0.0) >= bound);
    CHECK_THROWS_AS(lk_lower_bound(1, 1.0, 1.0), DomainError);
}

TEST_CASE("LK on the converged density") {
    const auto& f = fixture::converged();
    const double xs[] = {0.0, 0.5, 1.0, 2.0};
    for (Side side : {Side::left, Side::right}) {
        for (int n = 2; n <= 6; ++n) {
            for (int k = 1; 2 * k <= n; ++k) {
                const auto r = verify_lk(f, side, k, n, xs, 1.1);
                CHECK_MESSAGE(r.pass, to_string(side) << " n=" << n << " k=" << k << " worst " << r.worst_ratio);
            }
        }
        for (double x : {0.5, 1.0}) CHECK(lower_bound_from_lk(f, side, 2, x).pass);
    }
    CHECK_THROWS_AS(verify_lk(f, Side::left, 2, 3, xs), std::out_of_range);
    CHECK_THROWS_AS(verify_lk(f, Side::left, 1, 8, xs), UnsupportedOrder);
    const double far[] = {30.0};
    CHECK_THROWS_AS(verify_lk(f, Side::right, 1, 2, far), DomainError);
}

TEST_CASE("characteristic function of a normal density") {
    const auto gr = DensityGrid::from_function(-12.0, 12.0, 2401, [](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    });
    std::vector<double> ts = {0.0, 0.5, 1.0, 3.0, 5.0};
    const auto p = phi_from_grid(gr, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(p.phi_abs[i] == doctest::Approx(std::exp(-0.5 * ts[i] * ts[i])).epsilon(1e-9));
    }
    const double too_high[] = {nyquist(gr) * 1.01};
    CHECK_THROWS_AS(phi_from_grid(gr, too_high), AliasingError);
    std::ostringstream os;
    p.write_csv(os);
    CHECK(os.str().rfind("t,abs_phi\n0,1", 0) == 0);
}

TEST_CASE("|phi| of the converged density obeys the decay bound") {
    const auto& f = fixture::converged();
    std::vector<double> ts;
    for (int i = 0; i <= 400; ++i) ts.push_back(nyquist(f) * i / 400.0);
    const auto p = phi_from_grid(f, ts);
    CHECK(p.phi_abs[0] == doctest::Approx(1.0).epsilon(1e-3));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(p.phi_abs[i] <= 1.0 + 1e-12);
        if (ts[i] < 1.0) continue;
        for (int q = 0; q <= 3; ++q) CHECK(p.phi_abs[i] <= phi_decay_bound(q, ts[i]));
    }
}

TEST_CASE("sup norm bound on f^(k)") {
    CHECK(fk_sup_bound(0) == 131072.0);
    CHECK(fk_sup_bound(1) == std::ldexp(1.0, 28));
    CHECK(std::isinf(fk_sup_bound(41)));
    CHECK_THROWS_AS(fk_sup_bound(-1), DomainError);
    const auto& f = fixture::converged();
    for (int k = 0; k <= 6; ++k) CHECK(grid_sup_derivative(f, k) <= fk_sup_bound(k));
    CHECK(grid_sup_derivative(f, 0) < 1.0);
}

TEST_CASE("a_{n,k}") {
    CHECK(a_nk(2, 0).log2 == 28);
    CHECK(a_nk(2, 0).value == std::ldexp(1.0, 28));
    CHECK(a_nk(3, 0).log2 == 41);
    for (int n = 2; n <= 8; ++n) {
        for (int k = 0; k <= 8; ++k) {
            CHECK(a_nk(n + 1, k).log2 > a_nk(n, k).log2);
            CHECK(a_nk(n, k + 1).log2 > a_nk(n, k).log2);
        }
    }
    CHECK(std::isinf(a_nk(40, 10).value));
    CHECK_THROWS_AS(a_nk(1, 0), DomainError);
}

TEST_CASE("unimodality diagnostic") { CHECK(derivative_sign_changes(fixture::converged()) == 1); }
