#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qcd/common.hpp"

namespace qcd {

struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre rule on [lo, hi]. Nodes found by Newton iteration on the
/// Legendre recurrence, seeded with the Chebyshev-angle approximation.
inline Quadrature gauss_legendre(int n, double lo, double hi) {
    require(n >= 2, "gauss_legendre: need at least 2 nodes");
    Quadrature q;
    q.nodes.resize(static_cast<std::size_t>(n));
    q.weights.resize(static_cast<std::size_t>(n));
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
        q.nodes[static_cast<std::size_t>(i)] = mid - half * x;
        q.nodes[static_cast<std::size_t>(n - 1 - i)] = mid + half * x;
        q.weights[static_cast<std::size_t>(i)] = half * w;
        q.weights[static_cast<std::size_t>(n - 1 - i)] = half * w;
    }
    return q;
}

}  // namespace qcd
