#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qcd/posterior.hpp"
#include "qcd/rng.hpp"

using namespace qcd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const GaussianMeanShiftModel kModel075(0.75);
}

TEST_CASE("probability-domain updates", "[posterior]") {
    CHECK_THAT(phi_skip(0.0, 0.01), WithinAbs(0.01, 1e-15));
    CHECK_THAT(phi_skip(1.0, 0.3), WithinAbs(1.0, 1e-15));
    CHECK_THAT(phi_skip(0.2, 0.05), WithinAbs(0.24, 1e-15));

    // likelihood ratio 1 at the symmetry point: take reduces to skip
    for (double p : {0.0, 0.1, 0.5, 0.9}) {
        CHECK_THAT(phi_take(0.375, p, 0.05, kModel075), WithinAbs(phi_skip(p, 0.05), 1e-12));
    }
    CHECK_THAT(phi_take(1.7, 1.0, 0.05, kModel075), WithinAbs(1.0, 1e-15));

    // p-route equals z-route
    double via_p = phi_take(1.0, 0.2, 0.01, kModel075);
    double via_z = p_of_z(z_take(1.0, z_of_p(0.2), 0.01, kModel075));
    CHECK_THAT(via_p, WithinAbs(via_z, 1e-10));
}

TEST_CASE("log-odds skip update", "[posterior]") {
    CHECK_THAT(z_skip(kNegInf, 0.01), WithinAbs(std::log(0.01 / 0.99), 1e-12));

    // exact identity e^{z'} + 1 = (e^z + 1)/(1-rho)
    double zp = z_skip(0.0, 0.05);
    CHECK_THAT(std::exp(zp) + 1.0, WithinRel(2.0 / 0.95, 1e-12));

    double z = z_skip(kNegInf, 0.01);
    double prev = z;
    for (int k = 0; k < 100; ++k) {
        z = z_skip(z, 0.01);
        CHECK(z > prev);
        prev = z;
    }
}

TEST_CASE("geometric identity over many skip steps", "[posterior]") {
    // compare in log space: log(e^{Z_k}+1) = log(e^{z0}+1) + k |log(1-rho)|
    for (double rho : {0.01, 0.1, 0.5}) {
        double z0 = -2.0;
        double z = z0;
        double ref0 = log1pexp(z0);
        double step = -std::log1p(-rho);
        for (int k = 1; k <= 10'000; ++k) {
            z = z_skip(z, rho);
            if (k % 1000 == 0 || k < 10) {
                double lhs = log1pexp(z);
                double rhs = ref0 + k * step;
                REQUIRE_THAT(lhs, WithinRel(rhs, 1e-10));
            }
        }
    }
}

TEST_CASE("take update in both domains agrees on random inputs", "[posterior]") {
    Rng rng(2024);
    for (int i = 0; i < 10'000; ++i) {
        double z = -8.0 + 16.0 * rng.uniform();
        double x = 3.0 * rng.normal();
        double rho = 0.001 + 0.3 * rng.uniform();
        double z1 = z_take(x, z, rho, kModel075);
        double p1 = phi_take(x, p_of_z(z), rho, kModel075);
        REQUIRE_THAT(p_of_z(z1), WithinAbs(p1, 1e-9));
    }
    // symmetry point: z_take == z_skip
    CHECK_THAT(z_take(0.375, 0.0, 0.01, kModel075), WithinAbs(z_skip(0.0, 0.01), 1e-12));
}

TEST_CASE("domain equivalence along mixed skip/take paths", "[posterior]") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        double rho = 0.005 + 0.1 * rng.uniform();
        double p = 0.05 + 0.8 * rng.uniform();
        double z = z_of_p(p);
        for (int k = 0; k < 60; ++k) {
            if (rng.bernoulli(0.5)) {
                double x = 0.375 + rng.normal();
                z = z_take(x, z, rho, kModel075);
                p = phi_take(x, p, rho, kModel075);
            } else {
                z = z_skip(z, rho);
                p = phi_skip(p, rho);
            }
            if (p > 1.0 - 1e-12) break;
            REQUIRE_THAT(p_of_z(z), WithinAbs(p, 1e-9));
        }
    }
}

TEST_CASE("skip-climb time by direct iteration", "[posterior]") {
    CHECK(t_exact(5.1, 5.0, 0.3) == 0);

    // rho = 1/2 doubles e^z + 1 each step: first k with 2 * 2^k - 1 > e^5 is 7
    CHECK(t_exact(0.0, 5.0, 0.5) == 7);

    // B = 0.2 <=> b = log(0.25); first-passage from below
    double b = std::log(0.25);
    std::int64_t t = t_exact(kNegInf, b, 0.01);
    TBracket br = t_bracket(kNegInf, b, 0.01);
    CHECK(static_cast<double>(t) >= br.lower - 1e-9);
    CHECK(static_cast<double>(t) <= br.upper + 1e-9);
    CHECK_THAT(t_closed_form(kNegInf, b, 0.01), WithinAbs(std::log(1.25) / -std::log1p(-0.01), 1e-9));
}

TEST_CASE("closed form brackets the exact climb time", "[posterior]") {
    CHECK_THAT(t_closed_form(1.3, 1.3, 0.05), WithinAbs(0.0, 1e-12));

    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        double rho = 0.002 + 0.4 * rng.uniform();
        double y = -6.0 + 12.0 * rng.uniform();
        double x = rng.bernoulli(0.2) ? kNegInf : y - 8.0 * rng.uniform();
        auto t = static_cast<double>(t_exact(x, y, rho));
        TBracket br = t_bracket(x, y, rho);
        REQUIRE(t >= br.lower - 1e-9);
        REQUIRE(t <= br.upper + 1e-9);
    }

    // loose tolerance stated for the approximation itself
    Rng rng2(100);
    for (int i = 0; i < 100; ++i) {
        double rho = 0.002 + 0.048 * rng2.uniform();
        double y = -4.0 + 8.0 * rng2.uniform();
        double x = y - 6.0 * rng2.uniform();
        auto t = static_cast<double>(t_exact(x, y, rho));
        REQUIRE(std::abs(t_closed_form(x, y, rho) - t) <= 1.0 + rho * t + 1e-9);
    }
}

TEST_CASE("belief state round trip", "[posterior]") {
    for (double p : {1e-9, 1e-6, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-6, 1.0 - 1e-9}) {
        CHECK_THAT(BeliefState::from_p(p).p(), WithinAbs(p, 1e-12));
    }
    CHECK(BeliefState::from_p(0.0).z == kNegInf);
    CHECK(BeliefState::from_p(0.0).p() == 0.0);
}

TEST_CASE("threshold pair mapping", "[posterior]") {
    auto t = ThresholdPair::from_probabilities(0.98, 0.2);
    CHECK_THAT(t.a, WithinRel(std::log(0.98 / 0.02), 1e-12));
    CHECK_THAT(t.b, WithinRel(std::log(0.2 / 0.8), 1e-12));

    auto s = ThresholdPair::from_probabilities(0.9, 0.0);
    CHECK(s.b == kNegInf);

    auto u = ThresholdPair::from_log_odds(4.6, -2.2);
    CHECK_THAT(u.A, WithinRel(p_of_z(4.6), 1e-12));
    CHECK_THAT(u.B, WithinRel(p_of_z(-2.2), 1e-12));

    CHECK_THROWS_AS(ThresholdPair::from_probabilities(0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ThresholdPair::from_log_odds(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("monotonicity of the updates", "[posterior]") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        double rho = 0.001 + 0.5 * rng.uniform();
        double p = rng.uniform();
        CHECK(phi_skip(p, rho) >= p);
        double z = -20.0 + 40.0 * rng.uniform();
        CHECK(z_skip(z, rho) > z);
    }
}
