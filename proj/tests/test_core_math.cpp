#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "qslab/core_math.hpp"

using namespace qslab;

TEST_CASE("constants against long double evaluation") {
    CHECK(Constants::gamma == doctest::Approx(static_cast<double>(oracle::gamma_constant())).epsilon(1e-15));
    CHECK(std::fabs(Constants::gamma - 1.79434) < 1e-5);
    CHECK(Constants::var_z == doctest::Approx(static_cast<double>(oracle::var_z())).epsilon(1e-15));
    CHECK(std::fabs(Constants::var_z - 0.42026) < 1e-5);
}

TEST_CASE("toll function values") {
    CHECK(g(0.5) == doctest::Approx(1.0 - 2.0 * std::numbers::ln2).epsilon(1e-15));
    CHECK(g(0.45) == doctest::Approx(-0.376277627).epsilon(1e-8));
    // mpmath: g(0.01) = 0.887997..., g(0.02) = 0.803922...
    CHECK(g(0.01) == doctest::Approx(0.887997).epsilon(1e-6));
    CHECK(g(0.02) == doctest::Approx(0.803922).epsilon(1e-6));
    for (double u : {1e-6, 0.1, 0.3, 0.7, 0.999}) {
        CHECK(g(u) == doctest::Approx(static_cast<double>(oracle::g(u))).epsilon(1e-13));
        CHECK(g(u) == doctest::Approx(g(1.0 - u)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(g(0.0), DomainError);
    CHECK_THROWS_AS(g(1.0), DomainError);
    CHECK_THROWS_AS(g(-0.1), DomainError);
}

TEST_CASE("g is strictly decreasing on (0, 1/2) with minimum at 1/2") {
    double prev = g(1e-4);
    for (int i = 2; i <= 5000; ++i) {
        const double u = 1e-4 * i;
        const double v = g(u);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(g(0.5) <= g(0.4999));
    CHECK(g(0.5) <= g(0.5001));
}

TEST_CASE("left step a(eps)") {
    CHECK(left_step(0.05) == doctest::Approx(0.3762776).epsilon(1e-6));
    CHECK(left_step(0.05) == doctest::Approx(-static_cast<double>(oracle::g(0.45L))).epsilon(1e-13));
}

TEST_CASE("harmonic numbers") {
    CHECK(harmonic(1) == mpq_class(1));
    CHECK(harmonic(4) == mpq_class(25, 12));
    CHECK_THROWS_AS(harmonic(0), DomainError);
    for (std::uint64_t n : {100u, 500u, 2000u}) {
        const double err = std::fabs(harmonic(n).get_d() - std::log(static_cast<double>(n)) - 0.5772156649);
        CHECK(err < 1.0 / (2.0 * n) + 1e-3);
    }
}

TEST_CASE("moments match exhaustive enumeration for n <= 8") {
    const MomentTable t = exact_variance_table(8);
    REQUIRE(t.exact);
    for (int n = 1; n <= 8; ++n) {
        const auto e = oracle::enumerate_moments(n);
        CHECK(t.mean_q[n] == e.mean);
        CHECK(t.variance_q[n] == e.variance);
    }
    CHECK(t.variance_q[2] == 0);
    CHECK(t.variance_q[3] == mpq_class(2, 9));
    CHECK(t.mean_q[3] == mpq_class(8, 3));
}

TEST_CASE("recurrence mean equals the closed form up to 2000") {
    const MomentTable t = exact_variance_table(2000);
    REQUIRE(t.exact);
    for (std::uint64_t n = 1; n <= 2000; ++n) {
        if (n <= 60 || n % 97 == 0 || n == 1000 || n == 2000) {
            REQUIRE(t.mean_q[n] == oracle::closed_form_mean(n));
            REQUIRE(t.variance_q[n] == oracle::closed_form_variance(n));
        }
        REQUIRE(t.mean_q[n] == exact_mean(n));
    }
    // At n = 1000 the gap is still 0.011146 (O(log n / n) terms); it drops below 0.01 by n = 2000.
    const double v1000 = t.variance_q[1000].get_d() / 1e6;
    CHECK(v1000 - Constants::var_z == doctest::Approx(-0.011145964).epsilon(1e-6));
    const double v2000 = t.variance_q[2000].get_d() / 4e6;
    CHECK(std::fabs(v2000 - Constants::var_z) < 0.01);
}

TEST_CASE("float path agrees with the rational path") {
    const MomentTable q = exact_variance_table(2000);
    const MomentTable f = exact_variance_table(2000, 10);
    REQUIRE_FALSE(f.exact);
    for (std::size_t n : {10u, 100u, 1999u, 2000u}) {
        CHECK(f.mean[n] == doctest::Approx(q.mean[n]).epsilon(1e-9));
        CHECK(f.variance[n] == doctest::Approx(q.variance[n]).epsilon(1e-9));
    }
    CHECK(exact_mean_double(2000) == doctest::Approx(q.mean[2000]).epsilon(1e-12));
}

TEST_CASE("moment table csv") {
    std::ostringstream os;
    exact_variance_table(4).write_csv(os);
    CHECK(os.str().find("n,mean,variance\n") == 0);
    CHECK(os.str().find("\n3,8/3,2/9\n") != std::string::npos);
}

TEST_CASE("elementary inequalities") {
    const double one_eps[] = {0.099};
    const double one_delta[] = {0.01};
    const auto r = check_elementary_inequalities(one_eps, one_delta);
    REQUIRE(r.size() == 4);
    for (const auto& c : r) CHECK_MESSAGE(c.pass, c.family);
    CHECK(r[0].lhs == doctest::Approx(0.887997).epsilon(1e-6));
    CHECK(r[0].rhs == doctest::Approx(0.861845).epsilon(1e-6));

    std::vector<double> eg, dg;
    for (int i = 1; i < 1000; ++i) eg.push_back(1e-4 * i);
    for (int i = 1; i <= 1603; ++i) dg.push_back(1e-4 * i);
    for (const auto& c : check_elementary_inequalities(eg, dg)) CHECK_MESSAGE(c.pass, c.family << " at " << c.param);

    // Beyond delta ~ 0.16037 the toll bound fails (root found with mpmath).
    const double big[] = {0.161, 0.3, 0.49};
    for (const auto& c : check_elementary_inequalities({}, big)) CHECK_FALSE(c.pass);

    const double bad_eps[] = {0.1};
    const double bad_delta[] = {0.5};
    CHECK_THROWS_AS(check_elementary_inequalities(bad_eps, {}), DomainError);
    CHECK_THROWS_AS(check_elementary_inequalities({}, bad_delta), DomainError);
}
