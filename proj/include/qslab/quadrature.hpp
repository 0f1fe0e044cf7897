#pragma once

#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "qslab/errors.hpp"

namespace qslab {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

namespace detail {

template <unsigned N>
QuadratureRule gauss_legendre_unit() {
    using rule = boost::math::quadrature::gauss<double, N>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    QuadratureRule r;
    // Boost stores the nonnegative half of the symmetric rule on [-1, 1].
    for (std::size_t i = x.size(); i-- > 0;) {
        if (x[i] == 0.0) continue;
        r.nodes.push_back(-x[i]);
        r.weights.push_back(w[i]);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.nodes.push_back(x[i]);
        r.weights.push_back(w[i]);
    }
    return r;
}

}  // namespace detail

/// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(unsigned order) {
    switch (order) {
        case 2: return detail::gauss_legendre_unit<2>();
        case 3: return detail::gauss_legendre_unit<3>();
        case 4: return detail::gauss_legendre_unit<4>();
        case 5: return detail::gauss_legendre_unit<5>();
        case 6: return detail::gauss_legendre_unit<6>();
        case 7: return detail::gauss_legendre_unit<7>();
        case 8: return detail::gauss_legendre_unit<8>();
        case 10: return detail::gauss_legendre_unit<10>();
        case 12: return detail::gauss_legendre_unit<12>();
        case 16: return detail::gauss_legendre_unit<16>();
        case 20: return detail::gauss_legendre_unit<20>();
        default:
            throw UnsupportedOrder("Gauss-Legendre order " + std::to_string(order) +
                                   " not available (use 2-8, 10, 12, 16 or 20)");
    }
}

/// Composite rule on (0, 1/2]: panels with edges 2^-j / 2 for j = 0..panels-1,
/// closed by a last panel [0, 2^-(panels-1) / 2], each carrying `order` nodes.
inline QuadratureRule geometric_half_unit_rule(unsigned panels, unsigned order) {
    if (panels < 1) throw DomainError("need at least one u panel");
    const QuadratureRule base = gauss_legendre(order);
    std::vector<double> edges;
    for (unsigned j = 0; j < panels; ++j) edges.push_back(0.5 / static_cast<double>(1ULL << j));
    edges.push_back(0.0);
    QuadratureRule r;
    // Ascending in u; the smallest panel first.
    for (std::size_t p = edges.size() - 1; p-- > 0;) {
        const double a = edges[p + 1];
        const double b = edges[p];
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        for (std::size_t i = 0; i < base.size(); ++i) {
            r.nodes.push_back(mid + half * base.nodes[i]);
            r.weights.push_back(half * base.weights[i]);
        }
    }
    return r;
}

}  // namespace qslab
