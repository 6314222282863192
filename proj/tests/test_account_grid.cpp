#include <catch2/catch_amalgamated.hpp>

#include "glwb/account_grid.hpp"

using namespace glwb;
using Catch::Approx;

TEST_CASE("grid nodes and bounds", "[grid]") {
    const AccountGrid g = AccountGrid::build(100.0, 0.2, 0.01, 100.0);
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(g.j_min()) == 100.0);
    CHECK(g.node(g.j_min() + 1) == Approx(100.0 * std::exp(0.02)).epsilon(1e-14));
    CHECK(g.node(1) <= 1.0 * std::exp(0.02) + 1e-12);
    CHECK(g.node(g.j_max()) >= 100.0 * 100.0 / std::exp(0.02) - 1e-9);
    for (int j = 1; j < g.j_max(); ++j)
        CHECK(g.node(j + 1) / g.node(j) == Approx(std::exp(0.02)).epsilon(1e-13));
    CHECK_THROWS_AS(AccountGrid::build(100.0, 0.2, 0.01, 1.0), std::domain_error);
    CHECK_THROWS_AS(AccountGrid::build(-1.0, 0.2, 0.01, 100.0), std::domain_error);
}

TEST_CASE("successors bracket the drifted value", "[grid]") {
    const double dt = 0.01;
    const AccountGrid g = AccountGrid::build(100.0, 0.2, dt, 100.0);
    const double R = 0.05;
    for (int j = 2; j < g.j_max(); ++j) {
        const auto [jd, ju] = g.successors(j, R, dt);
        CHECK(jd == j - 1);
        CHECK(ju == j + 1);  // small dt, moderate rate
        const double drifted = g.node(j) * (1.0 + R * dt);
        CHECK(g.node(jd) <= drifted);
        CHECK(drifted <= g.node(ju));
    }
    CHECK(g.successors(1, R, dt).j_d == 1);
    CHECK(g.successors(g.j_max(), R, dt).j_u == g.j_max());
}

TEST_CASE("large drift climbs several cells", "[grid]") {
    const double dt = 0.04;  // coarse step so the drift clears one cell
    const AccountGrid g = AccountGrid::build(100.0, 0.2, dt, 100.0);
    const double R = 1.5;
    const int j = g.j_min();
    const auto [jd, ju] = g.successors(j, R, dt);
    CHECK(jd == j - 1);
    CHECK(ju > j + 1);
    CHECK(g.node(ju) >= g.node(j) * (1.0 + R * dt));
    CHECK(g.node(ju - 1) < g.node(j) * (1.0 + R * dt));
}

TEST_CASE("locate is exact on nodes and splits interior values", "[grid]") {
    const AccountGrid g = AccountGrid::build(100.0, 0.2, 0.01, 100.0);
    for (int j = 0; j <= g.j_max(); ++j) {
        const auto loc = g.locate(g.node(j));
        const double back = (1.0 - loc.w_hi) * g.node(loc.j_lo) + loc.w_hi * g.node(loc.j_hi);
        CHECK(back == Approx(g.node(j)).margin(1e-12));
        if (loc.w_hi == 0.0) CHECK(loc.j_lo == j);
    }
    SECTION("premium maps to j_min with unit weight") {
        const auto loc = g.locate(100.0);
        CHECK(loc.j_lo == g.j_min());
        CHECK(loc.w_hi == 0.0);
    }
    SECTION("zero maps to the absorbing node") {
        const auto loc = g.locate(0.0);
        CHECK(loc.j_lo == 0);
        CHECK(loc.w_hi == 0.0);
    }
    SECTION("midpoint weights agree with a linear scan") {
        const double v = 0.5 * (g.node(5) + g.node(6));
        const auto loc = g.locate(v);
        // scan for the bracketing pair
        int lo = 0;
        while (g.node(lo + 1) <= v) ++lo;
        CHECK(loc.j_lo == lo);
        CHECK(loc.j_hi == lo + 1);
        const double w = (v - g.node(lo)) / (g.node(lo + 1) - g.node(lo));
        CHECK(loc.w_hi == Approx(w).margin(1e-12));
    }
    SECTION("values beyond the top clamp with a flag") {
        const auto loc = g.locate(g.node(g.j_max()) * 2.0);
        CHECK(loc.j_lo == g.j_max());
        CHECK(loc.clamped_above);
    }
    CHECK_THROWS_AS(g.locate(-1.0), std::domain_error);
}

TEST_CASE("interpolation reproduces linear functions on interior points", "[grid]") {
    const AccountGrid g = AccountGrid::build(100.0, 0.2, 0.01, 100.0);
    std::vector<double> f(g.size());
    for (int j = 0; j < g.size(); ++j) f[j] = 3.5 * g.node(j) + 7.0;
    for (double v : {0.0, 0.37, 1.7, 55.0, 100.0, 1234.5, 9000.0}) {
        if (v > g.node(g.j_max())) continue;
        CHECK(g.interpolate(f, v) == Approx(3.5 * v + 7.0).epsilon(1e-12));
    }
}
