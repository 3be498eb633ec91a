#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "bloewner/errors.hpp"
#include "bloewner/wedge.hpp"

using namespace bloewner;

constexpr double kPi = std::numbers::pi;

TEST_CASE("angle and alpha are inverse") {
    CHECK(angle_from_alpha(1.0) == doctest::Approx(kPi / 3.0));
    CHECK_THROWS_AS(angle_from_alpha(0.0), InvalidArgument);
    CHECK(alpha_from_angle(kPi / 4.0) == doctest::Approx(2.0));
    for (double a : {0.1, 0.5, 3.0, 10.0}) CHECK(alpha_from_angle(angle_from_alpha(a)) == doctest::Approx(a));
}

TEST_CASE("balanced constants") {
    const auto [lo, hi] = balanced_constants(kPi / 4.0);
    CHECK(hi == doctest::Approx(std::sqrt(2.0)));
    CHECK(lo == doctest::Approx(-std::sqrt(2.0)));
    CHECK_THROWS_AS(balanced_constants(kPi / 2.0), InvalidArgument);
    CHECK_THROWS_AS(balanced_constants(0.0), InvalidArgument);
    CHECK_THROWS_AS(balanced_constants(2.0), InvalidArgument);
}

TEST_CASE("the negative root solves the cubic") {
    for (auto [t1, t2] : {std::pair{kPi / 4, 3 * kPi / 4}, std::pair{kPi / 6, 2 * kPi / 3}, std::pair{0.3, 1.2}}) {
        const double a = t1 / kPi;
        const double b = 1.0 - t2 / kPi;
        const double x = negative_root(a, b);
        CHECK(x < 0.0);
        const double scale = 1.0 + std::abs(x) * std::abs(x) * std::abs(x);
        CHECK(std::abs(wedge_cubic(a, b, x)) <= 1e-12 * scale);
        const WedgeSpec w = wedge_constants(t1, t2);
        CHECK(w.x == doctest::Approx(x));
        CHECK(w.a == doctest::Approx(a));
        CHECK(w.b == doctest::Approx(b));
        CHECK(w.zeta1 < w.zeta2);
        CHECK(w.zeta1_scaled == doctest::Approx(w.zeta1 / std::sqrt(2.0)));
    }
}

TEST_CASE("symmetric wedge: scaled constants equal the balanced closed form") {
    for (double theta : {kPi / 6.0, kPi / 4.0, kPi / 3.0, 0.4 * kPi}) {
        const WedgeSpec w = wedge_constants(theta, kPi - theta);
        const auto [lo, hi] = balanced_constants(theta);
        CHECK(w.zeta1_scaled == doctest::Approx(lo).epsilon(1e-9));
        CHECK(w.zeta2_scaled == doctest::Approx(hi).epsilon(1e-9));
        CHECK(w.zeta1 == doctest::Approx(-w.zeta2).epsilon(1e-9));
    }
}

TEST_CASE("folding map: boundary arguments trace the wedge") {
    const double t1 = 0.5;
    const double t2 = 2.1;
    const WedgeSpec w = wedge_constants(t1, t2);
    const auto arg_at = [&](double x) { return std::arg(folding_map(w.a, w.b, w.x, {x, 1e-13})); };
    CHECK(arg_at(2.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(arg_at(0.5) == doctest::Approx(t1).epsilon(1e-9));
    CHECK(arg_at(0.5 * w.x) == doctest::Approx(t2).epsilon(1e-9));
    CHECK(arg_at(2.0 * w.x) == doctest::Approx(kPi).epsilon(1e-9));
    // Interior points land in the upper half-plane.
    CHECK(folding_map(w.a, w.b, w.x, {0.3, 0.7}).imag() > 0.0);
    // Critical point of f sits at 0 and x (prevertices of the slit tips).
    const double h = 1e-6;
    const auto df = (folding_map(w.a, w.b, w.x, {1.0 + h, 0.0}) - folding_map(w.a, w.b, w.x, {1.0 - h, 0.0}));
    CHECK(std::isfinite(std::abs(df)));
}

TEST_CASE("invalid wedge angles") {
    CHECK_THROWS_AS(wedge_constants(1.0, 0.5), InvalidArgument);
    CHECK_THROWS_AS(wedge_constants(0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(wedge_constants(1.0, kPi), InvalidArgument);
}
