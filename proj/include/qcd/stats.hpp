#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace qcd {

/// Sum / sum-of-squares accumulator for one scalar statistic.
struct Accumulator {
    double sum = 0.0;
    double sumsq = 0.0;
    std::int64_t n = 0;

    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
    }

    void combine(const Accumulator& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        n += o.n;
    }

    double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }

    double variance() const {
        if (n < 2) return 0.0;
        double m = mean();
        double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return v > 0.0 ? v : 0.0;
    }

    double stddev() const { return std::sqrt(variance()); }

    double se() const { return n > 0 ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

/// Pairwise (tree) reduction over per-chunk accumulators. The tree shape is a
/// function of the chunk count alone, so the combined result does not depend
/// on how chunks were assigned to workers.
template <class T>
T pairwise_combine(std::vector<T> items) {
    if (items.empty()) return T{};
    std::size_t n = items.size();
    while (n > 1) {
        std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) items[i].combine(items[i + half]);
        n = half;
    }
    return items[0];
}

}  // namespace qcd
