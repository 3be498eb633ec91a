#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bloewner/driver.hpp"
#include "bloewner/errors.hpp"
#include "support.hpp"

using namespace bloewner;

namespace {

// Physicists' Hermite polynomial by the three-term recurrence.
double hermite(std::size_t m, double x) {
    double h0 = 1.0;
    double h1 = 2.0 * x;
    if (m == 0) return h0;
    for (std::size_t k = 1; k < m; ++k) {
        const double h2 = 2.0 * x * h1 - 2.0 * static_cast<double>(k) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

}  // namespace

TEST_CASE("two coincident particles separate like the square root") {
    for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
        const DrivingPath p = test::free_particles({0.0, 0.0}, alpha, 1.0);
        for (double t : {0.25, 1.0}) {
            const auto x = test::positions_at(p, t);
            REQUIRE(x.size() == 2);
            CHECK(std::abs(x[0] + std::sqrt(alpha * t)) <= 1e-6);
            CHECK(std::abs(x[1] - std::sqrt(alpha * t)) <= 1e-6);
        }
        const auto [lo, hi] = two_particle_exact(alpha, 1.0);
        CHECK(lo == doctest::Approx(-std::sqrt(alpha)));
        CHECK(hi == doctest::Approx(std::sqrt(alpha)));
    }
}

TEST_CASE("hermite zeros are roots of the recurrence polynomial") {
    for (std::size_t m = 1; m <= 12; ++m) {
        const auto z = hermite_zeros(m);
        REQUIRE(z.size() == m);
        CHECK(std::is_sorted(z.begin(), z.end()));
        for (double x : z) {
            // Relative to the size of the derivative scale.
            CHECK(std::abs(hermite(m, x)) <= 1e-9 * std::abs(hermite(m, std::abs(x) + 1.0)));
        }
    }
    const auto z3 = hermite_zeros(3);
    CHECK(z3[0] == doctest::Approx(-std::sqrt(1.5)));
    CHECK(z3[1] == doctest::Approx(0.0));
    CHECK(z3[2] == doctest::Approx(std::sqrt(1.5)));
}

TEST_CASE("coincident clusters follow the self-similar Hermite solution") {
    // x_j(t) = sqrt(2 alpha t) z_j for the zeros z_j of H_m.
    for (std::size_t m : {3u, 6u}) {
        const double alpha = 0.7;
        const DrivingPath p = test::free_particles(std::vector<double>(m, 0.0), alpha, 1.0);
        const auto x = test::positions_at(p, 1.0);
        const auto z = hermite_zeros(m);
        REQUIRE(x.size() == m);
        for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(x[j] - std::sqrt(2.0 * alpha) * z[j]) <= 1e-6);
    }
}

TEST_CASE("three particles: c^2 = 3 alpha") {
    const DrivingPath p = test::free_particles({0.0, 0.0, 0.0}, 1.0, 1.0);
    const auto x = test::positions_at(p, 1.0);
    CHECK(std::abs(x[0] + std::sqrt(3.0)) <= 1e-6);
    CHECK(std::abs(x[1]) <= 1e-6);
    CHECK(std::abs(x[2] - std::sqrt(3.0)) <= 1e-6);
}

TEST_CASE("branch startup predictor") {
    const std::vector<double> x{-1.0, 0.5, 0.5, 3.0};
    const auto y = branch_startup_step(x, 1, 1.0, 1e-4);
    REQUIRE(y.size() == 4);
    CHECK(y[1] < 0.5);
    CHECK(y[2] > 0.5);
    CHECK((y[2] - y[1]) == doctest::Approx(2.0 * std::sqrt(1e-4)).epsilon(1e-3));
}

TEST_CASE("coulomb drift matches the pair sum") {
    const std::vector<double> x{-2.0, -0.5, 1.0, 4.0};
    std::vector<double> d(4);
    coulomb_drift(x, 0.3, d);
    for (std::size_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            if (k != j) s += 1.0 / (x[j] - x[k]);
        }
        CHECK(d[j] == doctest::Approx(0.3 * s).epsilon(1e-14));
    }
}

TEST_CASE("beta: infinity is a distinct value") {
    CHECK(Beta::infinite().is_infinite());
    CHECK(Beta(std::numeric_limits<double>::infinity()).is_infinite());
    CHECK(!Beta(1e300).is_infinite());
    CHECK_THROWS_AS(Beta(0.0), InvalidArgument);
    CHECK_THROWS_AS(Beta(-1.0), InvalidArgument);
    CHECK(Beta(2.0).noise_scale(1.0) == doctest::Approx(1.0));
    CHECK(Beta::infinite().noise_scale(1.0) == 0.0);
}

TEST_CASE("alpha schedules are right-continuous") {
    const AlphaSchedule a({1.0, 2.0}, {0.5, 1.0, 2.0});
    CHECK(a.at(0.0) == 0.5);
    CHECK(a.at(0.999) == 0.5);
    CHECK(a.at(1.0) == 1.0);
    CHECK(a.at(2.0) == 2.0);
    CHECK_THROWS_AS(AlphaSchedule({1.0}, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(AlphaSchedule::constant(0.0), InvalidArgument);
}

TEST_CASE("angle schedule maps pi/3 to alpha 1") {
    const MarkedPlaneTree t = sample_conditioned_tree(11, 1.0, 4);
    const std::vector<double> angles(t.size(), std::numbers::pi / 3.0);
    const AlphaSchedule a = angle_schedule(t, angles);
    for (double v : a.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("dyson with infinite beta is the coulomb flow") {
    const MarkedPlaneTree t = sample_conditioned_tree(9, 1.0, 2);
    FlowConfig fc;
    const std::vector<double> x0{0.0};
    const DrivingPath a = coulomb_flow(t, AlphaSchedule::constant(1.0), x0, fc);
    const DrivingPath b = dyson_flow(t, AlphaSchedule::constant(1.0), Beta::infinite(), x0, fc, 17);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t s = 0; s < a.segments.size(); ++s) {
        CHECK(a.segments[s].times == b.segments[s].times);
        CHECK(a.segments[s].positions == b.segments[s].positions);
    }
}

TEST_CASE("dyson paths keep their order and are reproducible") {
    const MarkedPlaneTree t = sample_conditioned_tree(15, 2.0, 8);
    FlowConfig fc;
    fc.tolerance = 0.0;
    const std::vector<double> x0{0.0};
    const DrivingPath a = dyson_flow(t, AlphaSchedule::constant(0.5), Beta(2.0), x0, fc, 5);
    const DrivingPath b = dyson_flow(t, AlphaSchedule::constant(0.5), Beta(2.0), x0, fc, 5);
    for (std::size_t s = 0; s < a.segments.size(); ++s) {
        const PathSegment& seg = a.segments[s];
        CHECK(seg.positions == b.segments[s].positions);
        for (std::size_t k = 0; k < seg.rows(); ++k) {
            const auto r = seg.row(k);
            CHECK(std::is_sorted(r.begin(), r.end()));
        }
    }
    CHECK(a.extinct);
    CHECK(a.end_time == doctest::Approx(extinction_time(t)));
}

TEST_CASE("integrated mass counts alive atoms") {
    const DrivingPath p = test::free_particles({0.0, 0.0}, 1.0, 1.0);
    CHECK(p.integrated_mass(1.0) == doctest::Approx(2.0));
    CHECK(p.integrated_mass(0.5) == doctest::Approx(1.0));
    CHECK(p.max_alive() == 2);
}

TEST_CASE("explicit paths interpolate their samples") {
    const DrivingPath p = explicit_path({0.0, 1.0, 2.0}, 1, {{0.0, 1.0, 4.0}});
    CHECK(test::positions_at(p, 0.5)[0] == doctest::Approx(0.5));
    CHECK(test::positions_at(p, 1.5)[0] == doctest::Approx(2.5));
}
