#pragma once

// Monte Carlo simulation of the QuickSort comparison count X_n and of the
// limit fixed-point identity Z = U Z + (1-U) Z* + g(U).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <boost/random/discrete_distribution.hpp>

#include "qslab/core_math.hpp"
#include "qslab/errors.hpp"
#include "qslab/parallel.hpp"
#include "qslab/rng.hpp"

namespace qslab {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Draws of the comparison count X_n.
///
/// Only subproblem sizes are simulated. Subproblems of size <= leaf_cutoff are
/// drawn from their exact law, tabulated once by the pivot recursion; above the
/// cutoff the pivot rank is drawn uniformly. A cutoff of 1 gives plain recursion.
class ComparisonSampler {
public:
    explicit ComparisonSampler(std::uint32_t leaf_cutoff = 96) : cutoff_(std::max<std::uint32_t>(1, leaf_cutoff)) {
        build_tables();
    }

    std::uint32_t leaf_cutoff() const noexcept { return cutoff_; }

    /// One draw of X_n. The larger part is processed in place and the smaller
    /// one is stacked, so the stack never exceeds log2(n) entries.
    std::uint64_t draw(std::uint64_t n, Engine& rng) const {
        std::uint64_t total = 0;
        std::uint64_t stack[72];
        std::size_t top = 0;
        stack[top++] = n;
        while (top > 0) {
            std::uint64_t k = stack[--top];
            while (k > cutoff_) {
                total += k - 1;
                const std::uint64_t left = uniform_below(rng, k);
                const std::uint64_t right = k - 1 - left;
                stack[top++] = std::min(left, right);
                k = std::max(left, right);
            }
            if (k >= 2) total += draw_leaf(k, rng);
        }
        return total;
    }

    /// Law of X_k for k <= leaf_cutoff, indexed by comparison count.
    const std::vector<double>& leaf_pmf(std::uint64_t k) const { return pmf_[k]; }

private:
    std::uint64_t draw_leaf(std::uint64_t k, Engine& rng) const { return leaf_[k](rng); }

    void build_tables() {
        // pmf[k][c] = P(X_k = c), indexed from c = 0.
        std::vector<std::vector<double>> pmf(cutoff_ + 1);
        pmf[0] = {1.0};
        if (cutoff_ >= 1) pmf[1] = {1.0};
        for (std::uint32_t k = 2; k <= cutoff_; ++k) {
            const std::size_t max_c = static_cast<std::size_t>(k) * (k - 1) / 2;
            std::vector<double> p(max_c + 1, 0.0);
            for (std::uint32_t i = 1; i <= k; ++i) {
                const auto& a = pmf[i - 1];
                const auto& b = pmf[k - i];
                for (std::size_t x = 0; x < a.size(); ++x) {
                    if (a[x] == 0.0) continue;
                    for (std::size_t y = 0; y < b.size(); ++y) {
                        p[x + y + k - 1] += a[x] * b[y];
                    }
                }
            }
            for (double& v : p) v /= static_cast<double>(k);
            pmf[k] = std::move(p);
        }
        // Walker alias tables: O(1) per leaf draw.
        leaf_.reserve(cutoff_ + 1);
        for (std::uint32_t k = 0; k <= cutoff_; ++k) leaf_.emplace_back(pmf[k].begin(), pmf[k].end());
        pmf_ = std::move(pmf);
    }

    std::uint32_t cutoff_;
    std::vector<std::vector<double>> pmf_;
    std::vector<boost::random::discrete_distribution<std::uint64_t, double>> leaf_;
};

/// One draw of X_n with pivot rank uniform on {1..n}; X_0 = X_1 = 0.
inline std::uint64_t simulate_xn(std::uint64_t n, Engine& rng) {
    static const ComparisonSampler plain(1);
    return plain.draw(n, rng);
}

/// Samples of Z_n = (X_n - E X_n)/n, reproducible from (n, count, seed).
struct SampleSet {
    std::uint64_t n = 0;
    std::uint64_t count = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    static constexpr char kMagic[4] = {'Q', 'S', 'Z', 'S'};
    static constexpr std::uint16_t kVersion = 1;

    void write_binary(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot open " + path + " for writing");
        char header[16] = {};
        std::memcpy(header, kMagic, 4);
        std::memcpy(header + 4, &kVersion, sizeof kVersion);
        os.write(header, sizeof header);
        const std::uint64_t meta[3] = {n, count, seed};
        os.write(reinterpret_cast<const char*>(meta), sizeof meta);
        os.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!os) throw IoError("write failed: " + path);
    }

    static SampleSet read_binary(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open " + path);
        char header[16];
        is.read(header, sizeof header);
        if (!is || std::memcmp(header, kMagic, 4) != 0) throw IoError(path + ": not a QSZS sample file");
        std::uint16_t version = 0;
        std::memcpy(&version, header + 4, sizeof version);
        if (version != kVersion) throw IoError(path + ": unsupported sample file version " + std::to_string(version));
        std::uint64_t meta[3];
        is.read(reinterpret_cast<char*>(meta), sizeof meta);
        SampleSet s;
        s.n = meta[0];
        s.count = meta[1];
        s.seed = meta[2];
        s.values.resize(s.count);
        is.read(reinterpret_cast<char*>(s.values.data()), static_cast<std::streamsize>(s.count * sizeof(double)));
        if (!is) throw IoError(path + ": truncated sample file");
        return s;
    }

    void write_csv(std::ostream& os) const {
        os << "index,value\n";
        os.precision(17);
        for (std::size_t i = 0; i < values.size(); ++i) os << i << ',' << values[i] << '\n';
    }
};

struct SamplingOptions {
    unsigned threads = 1;
    /// Upper bound on count * n.
    double budget = 2.0e11;
    std::uint32_t leaf_cutoff = 96;
};

inline SampleSet sample_zn(std::uint64_t n, std::uint64_t count, std::uint64_t seed,
                           const SamplingOptions& opt = {}) {
    if (n < 2) throw DomainError("sample_zn requires n >= 2");
    if (count < 1) throw DomainError("sample_zn requires count >= 1");
    if (static_cast<double>(n) * static_cast<double>(count) > opt.budget) {
        throw ResourceError("sample_zn: count * n = " + std::to_string(static_cast<double>(n) * count) +
                            " exceeds budget " + std::to_string(opt.budget));
    }
    const ComparisonSampler sampler(opt.leaf_cutoff);
    const double mean = n <= 2000 ? exact_mean(n).get_d() : exact_mean_double(n);
    const double scale = static_cast<double>(n);
    SampleSet s{n, count, seed, std::vector<double>(count)};
    parallel_blocks(count, opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Engine rng = substream(seed, i);
            s.values[i] = (static_cast<double>(sampler.draw(n, rng)) - mean) / scale;
        }
    });
    return s;
}

/// Fraction of samples <= x.
inline double empirical_cdf(std::span<const double> sorted_values, double x) {
    if (sorted_values.empty()) throw DomainError("empirical_cdf on an empty sample");
    const auto it = std::upper_bound(sorted_values.begin(), sorted_values.end(), x);
    return static_cast<double>(it - sorted_values.begin()) / static_cast<double>(sorted_values.size());
}

inline double empirical_cdf(const SampleSet& s, double x) {
    std::vector<double> v = s.values;
    std::sort(v.begin(), v.end());
    return empirical_cdf(v, x);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_distance on an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw DomainError("ks_distance on an empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double fx = cdf(sample[i]);
        d = std::max({d, std::fabs(static_cast<double>(i + 1) / n - fx), std::fabs(fx - static_cast<double>(i) / n)});
    }
    return d;
}

namespace detail {

inline double tree_draw(int depth, Engine& rng) {
    if (depth == 0) return 0.0;
    const double u = uniform_open(rng);
    const double left = tree_draw(depth - 1, rng);
    const double right = tree_draw(depth - 1, rng);
    return u * left + (1.0 - u) * right + g(u);
}

}  // namespace detail

/// Samples of Z^(depth): Z^(0) = 0 and Z^(d) = U Z^(d-1) + (1-U) Z*^(d-1) + g(U),
/// expanded as a full binary tree with an independent U at every internal node.
inline SampleSet fixed_point_iterate_samples(int depth, std::uint64_t count, std::uint64_t seed,
                                             const SamplingOptions& opt = {}) {
    if (depth < 0) throw DomainError("depth must be nonnegative");
    if (depth > 24) throw ResourceError("fixed_point_iterate_samples: depth " + std::to_string(depth) + " > 24");
    if (count < 1) throw DomainError("count must be positive");
    if (std::ldexp(static_cast<double>(count), depth) > opt.budget) {
        throw ResourceError("fixed_point_iterate_samples: count * 2^depth exceeds budget");
    }
    SampleSet s{0, count, seed, std::vector<double>(count)};
    parallel_blocks(count, opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Engine rng = substream(seed, i);
            s.values[i] = detail::tree_draw(depth, rng);
        }
    });
    return s;
}

}  // namespace qslab
