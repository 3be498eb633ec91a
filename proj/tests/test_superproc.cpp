#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bloewner/errors.hpp"
#include "bloewner/superproc.hpp"
#include "support.hpp"

using namespace bloewner;

namespace {

constexpr double kPi = std::numbers::pi;
using Complex = std::complex<double>;

AtomicMeasure sample_measure(std::size_t n, double mass, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    AtomicMeasure m;
    for (std::size_t i = 0; i < n; ++i) m.atoms.push_back({g(eng), mass});
    std::sort(m.atoms.begin(), m.atoms.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
    return m;
}

template <typename D1, typename D2>
double brute_h(const AtomicMeasure& m, D1 d1, D2 d2) {
    double h = 0.0;
    for (const Atom& x : m.atoms) {
        for (const Atom& y : m.atoms) {
            const double q = x.position == y.position ? d2(x.position)
                                                      : (d1(x.position) - d1(y.position)) / (x.position - y.position);
            h += 0.5 * x.mass * y.mass * q;
        }
    }
    return h;
}

// Plane forests of `trees` full binary trees with `internal` branch points in total.
double log_forests(double trees, double internal) {
    const double total = 2.0 * internal + trees;
    return std::log(trees / total) + std::lgamma(total + 1.0) - std::lgamma(internal + 1.0) -
           std::lgamma(internal + trees + 1.0);
}

EmpiricalMeasureSeries conditioned_series(std::size_t n, std::uint64_t seed, double dt = 1e-3) {
    const double rate = 2.0 * std::sqrt(static_cast<double>(n));
    const MarkedPlaneTree t = sample_conditioned_tree(n, rate, seed);
    FlowConfig fc;
    fc.dt_max = dt;
    fc.tolerance = 0.0;
    const std::vector<double> x0{0.0};
    const DrivingPath p = coulomb_flow(t, AlphaSchedule::constant(2.0 / std::sqrt(static_cast<double>(n))), x0, fc);
    return empirical_series(p, n, 1.0 / std::sqrt(static_cast<double>(n)), p.end_time, true, rate);
}

}  // namespace

TEST_CASE("H for a bump matches the brute-force double sum") {
    const TestFunction phi = TestFunction::bump(0.2, 0.7);
    const auto d1 = [](double x) {
        const double u = (x - 0.2) / 0.7;
        return -u / 0.7 * std::exp(-0.5 * u * u);
    };
    const auto d2 = [](double x) {
        const double u = (x - 0.2) / 0.7;
        return (u * u - 1.0) / 0.49 * std::exp(-0.5 * u * u);
    };
    for (std::size_t n : {1u, 5u, 40u}) {
        const AtomicMeasure m = sample_measure(n, 1.0 / static_cast<double>(n), n);
        CHECK(std::abs(h_form(m, phi) - brute_h(m, d1, d2)) <= 1e-12);
        double diag = 0.0;
        for (const Atom& a : m.atoms) diag += a.mass * d2(a.position);
        CHECK(std::abs(h0_form(m, phi, 1.0 / n) - (h_form(m, phi) - 0.5 / n * diag)) <= 1e-12);
    }
}

TEST_CASE("H for Stieltjes functions matches the brute-force double sum") {
    const Complex z{0.3, 1.0};
    const AtomicMeasure m = sample_measure(30, 1.0 / 30.0, 3);
    const auto d1 = [&](double x) { return 1.0 / ((z - x) * (z - x)); };
    const auto d2 = [&](double x) { return 2.0 / ((z - x) * (z - x) * (z - x)); };
    const double re = brute_h(m, [&](double x) { return d1(x).real(); }, [&](double x) { return d2(x).real(); });
    const double im = brute_h(m, [&](double x) { return d1(x).imag(); }, [&](double x) { return d2(x).imag(); });
    CHECK(std::abs(h_form(m, TestFunction::stieltjes_re(z)) - re) <= 1e-12);
    CHECK(std::abs(h_form(m, TestFunction::stieltjes_im(z)) - im) <= 1e-12);
}

TEST_CASE("test function derivatives agree with finite differences") {
    for (const TestFunction& phi : {TestFunction::bump(-0.3, 0.4), TestFunction::stieltjes_re({0.0, 1.0}),
                                    TestFunction::stieltjes_im({0.5, 0.5})}) {
        for (double x : {-1.0, 0.1, 0.9}) {
            const double h = 1e-5;
            CHECK(phi.d1(x) == doctest::Approx((phi.value(x + h) - phi.value(x - h)) / (2 * h)).epsilon(1e-6));
            CHECK(phi.d2(x) == doctest::Approx((phi.d1(x + h) - phi.d1(x - h)) / (2 * h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("test function parsing") {
    CHECK(TestFunction::parse("bump:0,0.5").size() == 1);
    CHECK(TestFunction::parse("stieltjes:0,1").size() == 2);
    CHECK_THROWS_AS(TestFunction::parse("bump:0"), InvalidArgument);
    CHECK_THROWS_AS(TestFunction::parse("bump:0,-1"), InvalidArgument);
    CHECK_THROWS_AS(TestFunction::parse("stieltjes:0,0"), InvalidArgument);
    CHECK_THROWS_AS(TestFunction::parse("gauss:0,1"), InvalidArgument);
    CHECK_THROWS_AS(TestFunction::parse("bump:x,1"), InvalidArgument);
}

TEST_CASE("deterministic flow: the finite-n compensator is exact up to quadrature") {
    // Without branching or noise, d/dt <phi, mu> is exactly the compensator.
    const std::size_t n = 8;
    std::vector<double> x0;
    for (std::size_t i = 0; i < n; ++i) x0.push_back(-1.0 + 2.0 * static_cast<double>(i) / (n - 1));
    const TestFunction phi = TestFunction::bump(0.1, 0.6);
    std::vector<double> err;
    for (double dt : {1e-2, 5e-3}) {
        const DrivingPath p = test::free_particles(x0, 0.5, 0.5, dt, 0.0);
        const EmpiricalMeasureSeries s = empirical_series(p, n, 1.0 / n, 0.5, false, 0.0);
        CHECK(unconditioned_statistic(s, phi, 0.0) == 0.0);
        err.push_back(std::abs(unconditioned_statistic(s, phi, 0.5)));
    }
    CHECK(err[1] <= 1e-4);
    CHECK(err[0] / err[1] > 3.0);
}

TEST_CASE("quadratic variation prediction is the time integral of <phi^2, mu>") {
    const DrivingPath p = test::free_particles({0.0}, 1.0, 1.0);
    const EmpiricalMeasureSeries s = empirical_series(p, 1, 1.0, 1.0, false, 0.0);
    const TestFunction phi = TestFunction::bump(0.0, 1.0);
    CHECK(quadratic_variation_prediction(s, phi, 0.0) == 0.0);
    // The single atom stays at 0, so the integrand is 1.
    CHECK(quadratic_variation_prediction(s, phi, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("total mass series") {
    const DrivingPath p = test::free_particles({0.0, 0.0}, 1.0, 1.0);
    const EmpiricalMeasureSeries s = empirical_series(p, 4, 0.25, 1.0, false, 0.0);
    const auto [t, m] = total_mass_series(s);
    for (double v : m) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("offspring probability equals a ratio of forest counts") {
    // Q(N, R): among uniform plane forests of N trees with R vertices, the
    // fraction whose first root branches.
    for (std::size_t alive : {1u, 2u, 3u, 7u}) {
        for (std::size_t remaining = alive + 2; remaining <= alive + 40; remaining += 2) {
            const double k = static_cast<double>(remaining - alive) / 2.0;
            const double want = std::exp(log_forests(alive + 1.0, k - 1.0) - log_forests(alive, k));
            CHECK(offspring_probability(alive, remaining) == doctest::Approx(want).epsilon(1e-10));
        }
    }
    CHECK(offspring_probability(5, 5) == 0.0);
    CHECK(offspring_probability(1, 7) == doctest::Approx(1.0));
}

TEST_CASE("semicircle cdf against quadrature of the density") {
    CHECK(semicircle_cdf(-3.0) == 0.0);
    CHECK(semicircle_cdf(0.0) == doctest::Approx(0.5));
    CHECK(semicircle_cdf(2.5) == 1.0);
    for (double x : {-1.5, -0.3, 0.8, 1.9}) {
        const int m = 20000;
        const double h = (x + 2.0) / m;
        double s = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double y = -2.0 + i * h;
            const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            s += w * std::sqrt(std::max(0.0, 4.0 - y * y)) / (2.0 * kPi);
        }
        CHECK(semicircle_cdf(x) == doctest::Approx(s * h / 3.0).epsilon(1e-5));
    }
}

TEST_CASE("Kolmogorov series") {
    // 0.95 quantile of sup |bridge|.
    CHECK(kolmogorov_cdf(1.3581) == doctest::Approx(0.95).epsilon(1e-4));
    CHECK(kolmogorov_cdf(1.2238) == doctest::Approx(0.90).epsilon(1e-4));
    CHECK(kolmogorov_cdf(0.8, 50) == doctest::Approx(kolmogorov_cdf(0.8, 200)).epsilon(1e-15));
    const double m = bridge_sup_median();
    CHECK(kolmogorov_cdf(m / 4.0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("excursion maximum: mean sqrt(pi/2)") {
    const double lo = 0.3;
    CHECK(excursion_sup_cdf(lo) < 1e-12);
    const int m = 20000;
    const double hi = 6.0;
    const double h = (hi - lo) / m;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * (1.0 - excursion_sup_cdf(lo + i * h));
    }
    CHECK(lo + s * h / 3.0 == doctest::Approx(std::sqrt(kPi / 2.0)).epsilon(1e-6));
}

TEST_CASE("KS distance of a uniform grid") {
    std::vector<double> u;
    for (int i = 0; i < 100; ++i) u.push_back((i + 0.5) / 100.0);
    CHECK(ks_distance(u, [](double x) { return x; }) == doctest::Approx(0.005));
}

TEST_CASE("Bonferroni critical values") {
    CHECK(bonferroni_z(0.05, 1) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(bonferroni_z(0.05, 10) == doctest::Approx(2.807033768).epsilon(1e-8));
}

TEST_CASE("stopping at sigma") {
    const std::size_t n = 41;
    const double eps = 0.1;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const EmpiricalMeasureSeries s = conditioned_series(n, seed);
        const EmpiricalMeasureSeries st = stop_at_sigma(s, eps);
        CHECK(st.stopped);
        const double rate = 2.0 * std::sqrt(static_cast<double>(n));
        CHECK(st.sigma == doctest::Approx(sigma_of_tree(sample_conditioned_tree(n, rate, seed), n, eps)));
        CHECK(st.times.back() == doctest::Approx(st.sigma));
        for (std::size_t i = 0; i + 1 < st.size(); ++i) {
            if (st.times[i] < st.sigma) {
                CHECK((static_cast<double>(st.remaining_counts[i]) - 1.0) / n > eps);
            }
        }
        const TestFunction phi = TestFunction::bump(0.0, 0.5);
        CHECK(conditioned_statistic(st, phi, 0.0) == 0.0);
        CHECK(std::isfinite(conditioned_statistic(st, phi, st.sigma)));
    }
}

TEST_CASE("sup local time matches alive counts") {
    const std::size_t n = 31;
    const MarkedPlaneTree t = sample_conditioned_tree(n, 1.0, 9);
    std::size_t most = 0;
    for (const auto& v : t.forest().vertices()) most = std::max(most, alive_set(t, v.birth).size());
    CHECK(sup_local_time(t, n) == doctest::Approx(2.0 * most / std::sqrt(static_cast<double>(n))));
}

TEST_CASE("monte carlo results do not depend on the thread count") {
    McConfig c;
    c.n = 10;
    c.replicas = 24;
    c.t_list = {0.1, 0.2};
    c.phis = TestFunction::parse("bump:0,0.5");
    c.keep_samples = true;
    c.jobs = 1;
    const MartingaleReport a = mc_martingale_test(c);
    c.jobs = 3;
    const MartingaleReport b = mc_martingale_test(c);
    CHECK(a.samples == b.samples);
    REQUIRE(a.stats.size() == 2);
    CHECK(a.mass.size() == 2);

    const auto sa = sup_local_time_samples(21, 20, 1.0, 4, 1);
    const auto sb = sup_local_time_samples(21, 20, 1.0, 4, 2);
    CHECK(sa == sb);
}

TEST_CASE("offspring bins carry the predicted probability") {
    const OffspringReport r = offspring_test(21, 300, 1.0, 5, 20);
    CHECK(r.tested == r.bins.size());
    CHECK(r.tested > 0);
    for (const auto& b : r.bins) {
        CHECK(b.q == doctest::Approx(offspring_probability(b.alive, b.remaining)));
        CHECK(b.deaths >= 20);
        CHECK(b.branches <= b.deaths);
    }
}

TEST_CASE("characteristic root inverts the Burgers characteristic") {
    AtomicMeasure m;
    m.atoms = {{-0.5, 0.5}, {0.5, 0.5}};
    const Complex z{0.2, 1.5};
    const Complex w = characteristic_root(m, z, 0.7);
    CHECK(std::abs(w + 0.7 * stieltjes_transform(m, w) - z) <= 1e-12);
}
