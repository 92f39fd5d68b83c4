#include <catch2/catch_amalgamated.hpp>

#include "qcd/experiments.hpp"

using namespace qcd;

TEST_CASE("trade-off points approach the baseline as ANO% grows", "[experiments]") {
    GaussianMeanShiftModel model(1.0);
    auto points = tradeoff_curve(model, {0.05}, 1e-2, {90.0, 30.0}, 20'000, 31);
    REQUIRE(points.size() == 2);
    const auto& high = points[0];
    const auto& low = points[1];
    CHECK(high.ano_percent_target == 90.0);

    // near-100% observation budget reproduces the baseline delay
    CHECK(high.add / high.add_shiryaev < 1.10);
    // tighter budgets cannot be faster than looser ones (up to noise)
    CHECK(low.add + 3.0 * low.add_se >= high.add - 3.0 * high.add_se);
    // the false alarm calibration held
    CHECK(std::abs(high.pfa / 1e-2 - 1.0) < 0.25);
    CHECK(std::abs(low.pfa / 1e-2 - 1.0) < 0.25);
    // achieved ANO% near its target
    CHECK(std::abs(low.ano_percent - 30.0) < 6.0);
}

TEST_CASE("fractional sampling needs more delay at the same budget", "[experiments]") {
    GaussianMeanShiftModel model(0.75);
    auto points = compare_fractional(model, {0.01}, 1e-2, 50.0, 20'000, 37);
    REQUIRE(points.size() == 1);
    const auto& p = points[0];
    CHECK(p.add_two_threshold < p.add_fractional);
    CHECK(std::abs(p.pfa_fractional / 1e-2 - 1.0) < 0.25);
    CHECK(std::abs(p.ano_percent_fractional - 50.0) < 6.0);
    CHECK(std::abs(p.ano_percent_two_threshold - 50.0) < 6.0);
}
