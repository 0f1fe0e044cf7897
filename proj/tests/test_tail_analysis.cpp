#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fixture.hpp"
#include "oracles.hpp"
#include "qslab/tail_analysis.hpp"

using namespace qslab;

TEST_CASE("planted left model recovers gamma") {
    const double gam = static_cast<double>(oracle::gamma_constant());
    const auto gr = DensityGrid::from_log_function(-3.0, 3.0, 1201, [&](double x) { return -std::exp(-gam * x); });
    const auto fit = left_envelope_fit(gr, 0.8, 2.2);
    CHECK(std::fabs(fit.slope - gam) < 1e-3);
    CHECK(std::fabs(fit.intercept) < 1e-3);
    CHECK(fit.r2 > 0.999999);
    CHECK(fit.nodes >= 8);
    CHECK_THROWS_AS(left_envelope_fit(gr, 0.8, 0.81), DomainError);
    CHECK_THROWS_AS(left_envelope_fit(gr, 1.0, 4.0), DomainError);
}

TEST_CASE("planted right model gives ratio 1") {
    const auto gr = DensityGrid::from_log_function(-1.0, 20.0, 2101, [](double x) {
        return x > 0.0 ? -x * std::log(x) : 0.0;
    });
    const auto p = right_envelope_fit(gr, 3.0, 19.0);
    for (const auto& [x, r] : p.ratio) CHECK(std::fabs(r - 1.0) < 1e-6);
    // 1 - C/ln x <= 1 <= 1 + ln ln x / ln x + C / ln x holds with C = 0.
    CHECK(p.band_constant == doctest::Approx(0.0));
    CHECK_THROWS_AS(right_envelope_fit(gr, 2.0, 10.0), DomainError);
    CHECK_THROWS_AS(right_envelope_fit(gr, 3.0, 21.0), DomainError);
}

TEST_CASE("limsup proxies on planted profiles") {
    const double gam = static_cast<double>(oracle::gamma_constant());
    NormProfile left{0, Side::left, {}, {}};
    NormProfile right{0, Side::right, {}, {}};
    for (double x = 0.1; x < 3.0; x += 0.1) {
        left.xs.push_back(x);
        left.norms.push_back(std::exp(-std::exp(gam * x)));
    }
    for (double x = 1.5; x < 8.0; x += 0.5) {
        right.xs.push_back(x);
        right.norms.push_back(std::exp(-x * std::log(x)));
    }
    const std::vector<NormProfile> ps = {left, right};
    for (const auto& r : limsup_proxies(ps)) {
        REQUIRE_FALSE(r.excluded);
        CHECK(std::fabs(r.value) < 1e-9);
        CHECK(std::isnan(r.diff));
    }
    NormProfile flagged{0, Side::left, {1.0}, {1.0}};
    const std::vector<NormProfile> fs = {flagged};
    CHECK(limsup_proxies(fs).front().excluded);
}

TEST_CASE("left lemma on the converged grid") {
    const auto& f = fixture::converged();
    const auto reps = verify_left_lemma(f, 0.05, 5);
    CHECK(reps.size() == 7);  // iterated k = 2..5, one-step k = 3..5
    for (const auto& r : reps) {
        CHECK_MESSAGE(r.pass, to_string(r.lemma_id));
        CHECK(r.pass == (r.log_lhs >= r.log_rhs));
    }
    // k = 2 iterated form: m_{2a} >= 2 eps^3 m_{2a}.
    CHECK(reps.front().lemma_id == LemmaId::left_iterated);
    CHECK(reps.front().log_rhs == doctest::Approx(reps.front().log_lhs + std::log(2.0 * 0.05 * 0.05 * 0.05)));
    try {
        (void)verify_left_lemma(f, 0.05, 9);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("max feasible k = 6") != std::string::npos);
    }
    CHECK_THROWS_AS(verify_left_lemma(f, 0.1, 3), DomainError);
}

TEST_CASE("right lemmas on the converged grid") {
    const auto& f = fixture::converged();
    const double c = right_constant(f);
    CHECK(c > 0.0);
    CHECK(c < 2.0);
    const auto reps = verify_right_lemmas(f, 0.5, 0.02, 4);
    CHECK(reps.size() == 3 + 3 + 4);
    for (const auto& r : reps) CHECK_MESSAGE(r.pass, to_string(r.lemma_id));
    // k = 1 iterated form compares m_{2+b} with m_3.
    for (const auto& r : reps) {
        if (r.lemma_id == LemmaId::right_iterated && r.parameters.back().second == 1.0) {
            CHECK(r.log_lhs >= r.log_rhs);
        }
    }
    CHECK_THROWS_AS(verify_right_lemmas(f, 1.0, 0.02, 2), DomainError);
    CHECK_THROWS_AS(verify_right_lemmas(f, 0.5, 0.5, 2), DomainError);
    CHECK_THROWS_AS(verify_right_lemmas(f, 0.9, 0.3, 2), DomainError);   // g(0.3) < 0.9
    CHECK_THROWS_AS(verify_right_lemmas(f, 0.5, 0.05, 8), DomainError);  // chain exceeds (g - b)/delta
    CHECK_THROWS_AS(verify_right_lemmas(f, 0.5, 0.02, 27), DomainError); // beyond grid reach
}

TEST_CASE("running minima are monotone") {
    const auto& f = fixture::converged();
    double pl = 2.0, pr = 2.0;
    for (double z = 0.0; z <= 2.4; z += 0.05) {
        const double ml = tail_min(f, Side::left, z);
        CHECK(ml <= pl);
        pl = ml;
    }
    for (double z = 0.0; z <= 11.5; z += 0.1) {
        const double mr = tail_min(f, Side::right, z);
        CHECK(mr <= pr);
        pr = mr;
    }
}

TEST_CASE("tail shapes on the converged grid") {
    const auto& f = fixture::converged();
    const auto lf = left_envelope_fit(f, 0.8, 2.2);
    CHECK(lf.slope >= 1.2);
    CHECK(lf.slope <= 2.4);
    const double r10 = right_ratio_at(f, 10.0);
    CHECK(r10 >= 0.7);
    CHECK(r10 <= 1.8);
    CHECK(right_envelope_fit(f, 3.0, 11.0).band_constant <= 5.0);
}

TEST_CASE("1/a(x^{-1/2}) approaches gamma/ln 2 at rate 1/x") {
    const double target = static_cast<double>(oracle::gamma_constant() / std::log(2.0L));
    for (double x : {100.0, 300.0, 1000.0, 1e4, 1e5}) {
        const double gap = std::fabs(1.0 / left_step(1.0 / std::sqrt(x)) - target);
        CHECK(gap <= 32.0 / x);
    }
    // Leading coefficient x (1/a - gamma/ln 2) -> 4/(2 ln 2 - 1)^2.
    const double lead = 4.0 / std::pow(2.0 * std::numbers::ln2 - 1.0, 2);
    const double x = 1e6;
    CHECK(x * std::fabs(1.0 / left_step(1.0 / std::sqrt(x)) - target) == doctest::Approx(lead).epsilon(1e-3));
}

TEST_CASE("lemma report json") {
    const auto r = LemmaReport::make(LemmaId::right_step, {{"b", 0.5}, {"z", 2.0}}, -1.0, -2.0);
    const auto j = r.to_json();
    CHECK(j["lemma_id"] == "right_step");
    CHECK(j["parameters"]["z"] == 2.0);
    CHECK(j["pass"] == true);
    CHECK(j["margin"].get<double>() == doctest::Approx(std::exp(-1.0) - std::exp(-2.0)));
}
