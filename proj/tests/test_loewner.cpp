#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bloewner/io.hpp"
#include "bloewner/loewner.hpp"
#include "support.hpp"

using namespace bloewner;

namespace {

constexpr double kPi = std::numbers::pi;

// Root of w^2 = s in the closed upper half-plane.
Complex upper_sqrt(Complex s) {
    Complex r = std::sqrt(s);
    return r.imag() < 0.0 ? -r : r;
}

DrivingPath single_slit() { return test::free_particles({0.0}, 1.0, 1.0); }

}  // namespace

TEST_CASE("single slit: forward map is sqrt(z^2 + 2t)") {
    const DrivingPath p = single_slit();
    SolverConfig cfg;
    for (Complex z : {Complex{0.3, 1.0}, Complex{-2.0, 0.5}, Complex{1.0, 3.0}}) {
        for (double t : {0.25, 1.0}) {
            const ForwardResult r = forward_map(p, t, z, cfg);
            REQUIRE(!r.swallowed_at);
            CHECK(std::abs(r.value - upper_sqrt(z * z + 2.0 * t)) <= 1e-8);
        }
    }
}

TEST_CASE("single slit: reverse map is sqrt(w^2 - 2t)") {
    const DrivingPath p = single_slit();
    SolverConfig cfg;
    for (Complex w : {Complex{0.3, 1.0}, Complex{-2.0, 0.5}, Complex{0.0, 0.2}}) {
        CHECK(std::abs(reverse_map(p, 1.0, w, cfg) - upper_sqrt(w * w - 2.0)) <= 1e-8);
    }
}

TEST_CASE("half-plane capacity equals the integrated mass") {
    SolverConfig cfg;
    CHECK(hcap(single_slit(), 1.0, cfg) == doctest::Approx(1.0).epsilon(1e-8));
    const DrivingPath two = test::free_particles({0.0, 0.0}, 1.0, 1.0);
    CHECK(hcap(two, 1.0, cfg) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(hcap(two, 0.3, cfg) == doctest::Approx(0.6).epsilon(1e-8));
}

TEST_CASE("single slit trace is the vertical segment of height sqrt(2t)") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    const TracedHull h = trace_hull(single_slit(), cfg);
    REQUIRE(h.curves.size() == 1);
    const HullCurve& c = h.curves.front();
    for (std::size_t k = 0; k < c.points.size(); ++k) {
        CHECK(std::abs(c.points[k].real()) <= 1e-6);
        CHECK(std::abs(c.points[k].imag() - std::sqrt(2.0 * c.times[k])) <= 2e-4);
    }
    for (const auto& [t, b] : h.capacity_trace) CHECK(std::abs(b - t) <= 1e-6 * (1.0 + b));
    const BaseAngles ba = base_angles(h, 0.0);
    REQUIRE(ba.angles.size() == 1);
    CHECK(ba.angles[0] == doctest::Approx(kPi / 2.0).epsilon(1e-4));
    CHECK(ba.gaps[0] + ba.gaps[1] == doctest::Approx(kPi));
}

TEST_CASE("forward after reverse is the identity") {
    const DrivingPath p = test::free_particles({0.0, 0.0}, 1.0, 1.0);
    SolverConfig cfg;
    for (Complex w : {Complex{0.1, 0.1}, Complex{-1.5, 2.0}, Complex{3.0, 10.0}}) {
        const Complex z = reverse_map(p, 1.0, w, cfg);
        const ForwardResult r = forward_map(p, 1.0, z, cfg);
        REQUIRE(!r.swallowed_at);
        CHECK(std::abs(r.value - w) <= 1e-6);
    }
}

TEST_CASE("points hit by the tip are swallowed") {
    const DrivingPath p = single_slit();
    SolverConfig cfg;
    const ForwardResult r = forward_map(p, 1.0, Complex{0.0, 1.0}, cfg);
    REQUIRE(r.swallowed_at);
    CHECK(*r.swallowed_at == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("ray fit recovers a direction") {
    std::vector<Complex> pts;
    for (int k = 1; k <= 20; ++k) pts.push_back(std::polar(0.01 * k, 1.1));
    CHECK(fit_ray_angle({0.0, 0.0}, pts) == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("two-slit hull is a valid embedding") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    const DrivingPath p = test::free_particles({0.0, 0.0}, 1.0, 1.0);
    const TracedHull h = trace_hull(p, cfg);
    CHECK(h.curves.size() == 2);
    const EmbeddingReport r = verify_embedding(h);
    CHECK(r.pass);
    const GrowthReport g = local_growth_check(p, h, 1.0);
    CHECK(g.pass);
    // The two slits are mirror images.
    const auto& a = h.curves[0].points.back();
    const auto& b = h.curves[1].points.back();
    CHECK(a.real() == doctest::Approx(-b.real()).epsilon(1e-6));
    CHECK(a.imag() == doctest::Approx(b.imag()).epsilon(1e-6));
}

TEST_CASE("tree hulls are embedded with trivalent branch points") {
    const MarkedPlaneTree t = sample_conditioned_tree(7, 1.0, 12);
    FlowConfig fc;
    const std::vector<double> x0{0.0};
    const DrivingPath p = coulomb_flow(t, AlphaSchedule::constant(1.0), x0, fc);
    SolverConfig cfg;
    cfg.dt = 1e-3;
    const TracedHull h = trace_hull(p, cfg);
    CHECK(h.curves.size() == 7);
    CHECK(h.branch_images.size() == 3);
    CHECK(verify_embedding(h).pass);
    for (const auto& b : h.branch_images) {
        const auto gaps = branch_vertex_angles(h, b.vertex);
        REQUIRE(gaps.size() == 3);
        double sum = 0.0;
        for (double g : gaps) {
            CHECK(g > 0.0);
            sum += g;
        }
        CHECK(sum == doctest::Approx(2.0 * kPi));
    }
}
