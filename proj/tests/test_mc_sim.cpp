#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "qslab/mc_sim.hpp"

using namespace qslab;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

std::string temp_path(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("leaf tables equal the enumerated law") {
    const ComparisonSampler s(8);
    for (int n = 2; n <= 8; ++n) {
        const auto law = oracle::enumerate_law(n);
        double fact = 1.0;
        for (int i = 2; i <= n; ++i) fact *= i;
        const auto& pmf = s.leaf_pmf(n);
        double total = 0.0;
        for (std::size_t c = 0; c < pmf.size(); ++c) {
            const auto it = law.find(c);
            const double want = it == law.end() ? 0.0 : it->second / fact;
            CHECK(pmf[c] == doctest::Approx(want).epsilon(1e-14));
            total += pmf[c];
        }
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("small n") {
    const auto s = sample_zn(2, 3, 7);
    for (double v : s.values) CHECK(v == 0.0);
    // X_3 is 2 w.p. 1/3 and 3 w.p. 2/3.
    Engine rng = substream(11, 0);
    int twos = 0;
    const int trials = 30000;
    for (int i = 0; i < trials; ++i) {
        const auto x = simulate_xn(3, rng);
        REQUIRE((x == 2 || x == 3));
        twos += x == 2;
    }
    CHECK(std::fabs(twos / double(trials) - 1.0 / 3.0) < 4.0 * std::sqrt(2.0 / 9.0 / trials));
}

TEST_CASE("sample mean and variance match the exact moments") {
    const std::uint64_t n = 400;
    const auto s = sample_zn(n, 40000, 3);
    const double sd = std::sqrt(var_of(s.values));
    CHECK(std::fabs(mean_of(s.values)) < 4.0 * sd / std::sqrt(40000.0));
    const double var_exact = exact_variance_table(n).variance_q[n].get_d() / (double(n) * n);
    // The sample variance of near-Z data has relative sd about sqrt(2 + kurtosis excess)/sqrt(count).
    CHECK(var_of(s.values) == doctest::Approx(var_exact).epsilon(0.03));
}

TEST_CASE("leaf cutoff does not change the law") {
    const std::uint64_t n = 500;
    SamplingOptions plain;
    plain.leaf_cutoff = 1;
    const auto a = sample_zn(n, 20000, 5, plain);
    const auto b = sample_zn(n, 20000, 6);
    // 1% critical value of the two-sample KS statistic: 1.63 sqrt(2/m).
    CHECK(ks_distance(a.values, b.values) < 1.63 * std::sqrt(2.0 / 20000));
}

TEST_CASE("determinism across seeds and threads") {
    SamplingOptions one, four;
    four.threads = 4;
    const auto a = sample_zn(1000, 500, 42, one);
    const auto b = sample_zn(1000, 500, 42, four);
    CHECK(a.values == b.values);
    const auto c = sample_zn(1000, 500, 43, one);
    CHECK(a.values != c.values);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(sample_zn(1, 10, 1), DomainError);
    CHECK_THROWS_AS(sample_zn(10, 0, 1), DomainError);
    SamplingOptions tight;
    tight.budget = 1e3;
    CHECK_THROWS_AS(sample_zn(100, 100, 1, tight), ResourceError);
    CHECK_THROWS_AS(fixed_point_iterate_samples(25, 1, 1), ResourceError);
    CHECK_THROWS_AS(ks_distance(std::vector<double>{}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("sample file round trip") {
    const auto s = sample_zn(50, 100, 9);
    const auto path = temp_path("qslab_test_samples.qszs");
    s.write_binary(path);
    const auto r = SampleSet::read_binary(path);
    CHECK(r.n == 50);
    CHECK(r.count == 100);
    CHECK(r.seed == 9);
    CHECK(r.values == s.values);
    {
        std::ofstream bad(path, std::ios::binary);
        bad << "not a sample file at all, definitely not";
    }
    CHECK_THROWS_AS(SampleSet::read_binary(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("ks distance") {
    const std::vector<double> a = {0.1, 0.2, 0.3, 0.4};
    CHECK(ks_distance(a, a) == 0.0);
    CHECK(ks_distance(a, std::vector<double>{10.0, 11.0}) == 1.0);
    // Uniform sample against the uniform CDF: at most 1/m.
    std::vector<double> u;
    for (int i = 0; i < 100; ++i) u.push_back((i + 0.5) / 100.0);
    CHECK(ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) == doctest::Approx(0.005));
    CHECK(empirical_cdf(a, 0.25) == 0.5);
}

TEST_CASE("tree sampler variance follows V_d = var_z (1 - (2/3)^d)") {
    // E[U^2 + (1-U)^2] = 2/3 and E g(U) = 0, so V_d = (2/3) V_{d-1} + Var g(U).
    for (int d : {1, 3, 10}) {
        const auto s = fixed_point_iterate_samples(d, 20000, 100 + d);
        const double want = static_cast<double>(oracle::var_z()) * (1.0 - std::pow(2.0 / 3.0, d));
        CHECK(var_of(s.values) == doctest::Approx(want).epsilon(0.05));
        CHECK(std::fabs(mean_of(s.values)) < 4.0 * std::sqrt(want / 20000));
    }
}

TEST_CASE("Z_n and the tree sampler agree in law") {
    const auto a = sample_zn(4000, 10000, 21);
    const auto b = fixed_point_iterate_samples(14, 10000, 22);
    CHECK(ks_distance(a.values, b.values) < 1.63 * std::sqrt(2.0 / 10000) + 0.005);
}
