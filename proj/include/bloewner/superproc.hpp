#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bloewner/driver.hpp"
#include "bloewner/genealogy.hpp"

namespace bloewner {

/// Rescaled atomic measures along a driving path. Entries follow the path's
/// grid rows; at an event time two entries share the same time (left and
/// right limits), so trapezoid sums never straddle a jump.
struct EmpiricalMeasureSeries {
    std::vector<double> times;
    std::vector<AtomicMeasure> measures;
    std::size_t n = 0;
    double scale = 0.0;  // mass of every atom: 1/n or 1/sqrt(n)
    Beta beta = Beta::infinite();
    double alpha = 0.0;  // repulsion strength of the underlying flow
    double rate = 0.0;   // branching rate of the genealogy
    std::vector<std::size_t> alive_counts;
    std::vector<std::size_t> remaining_counts;  // conditioned runs only
    bool conditioned = false;
    bool stopped = false;
    double sigma = std::numeric_limits<double>::infinity();

    std::size_t size() const { return times.size(); }
    /// Index of the last entry with time <= t.
    std::size_t index_at(double t) const;
};

/// Builds a series from every grid row of `path` with time <= t_max. When
/// `conditioned`, R_t = n - #{deaths <= t} is recorded as well. If the path is
/// extinct before t_max an empty measure is appended at the extinction time.
EmpiricalMeasureSeries empirical_series(const DrivingPath& path, std::size_t n, double scale, double t_max,
                                        bool conditioned, double rate = 0.0);

struct TestFunction {
    enum class Kind { bump, stieltjes_re, stieltjes_im };

    Kind kind = Kind::bump;
    double center = 0.0;
    double width = 1.0;
    std::complex<double> pole{0.0, 1.0};

    static TestFunction bump(double center, double width);
    static TestFunction stieltjes_re(std::complex<double> z);
    static TestFunction stieltjes_im(std::complex<double> z);
    /// Parses "bump:c,w", "stieltjes:re,im" (both parts) into one or two functions.
    static std::vector<TestFunction> parse(const std::string& text);

    double value(double x) const;
    double d1(double x) const;
    double d2(double x) const;
    std::string label() const;
};

/// H(phi) = 1/2 sum_{x,y} m_x m_y (phi'(x) - phi'(y)) / (x - y), diagonal phi''(x).
double h_form(const AtomicMeasure& measure, const TestFunction& phi);
/// H with the diagonal removed: H - scale/2 <phi'', mu>.
double h0_form(const AtomicMeasure& measure, const TestFunction& phi, double scale);

double integrate(const AtomicMeasure& measure, const TestFunction& phi);

enum class Compensator {
    limit,     // H only
    finite_n,  // H + (1/beta - 1/2) * scale * <phi''>, exact for the finite system
};

/// M_t = <phi, mu_t> - <phi, mu_0> - int_0^t drift ds (trapezoid on the series grid).
double unconditioned_statistic(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                               Compensator compensator = Compensator::finite_n);

/// The statistic at several grid times from one pass over the series.
std::vector<double> unconditioned_statistics(const EmpiricalMeasureSeries& series, const TestFunction& phi,
                                             const std::vector<double>& times,
                                             Compensator compensator = Compensator::finite_n);

/// int_0^t <phi^2, mu_s> ds; with `finite_n` the motion term
/// (2/(beta n)) int <phi'^2, mu_s> ds is added.
double quadratic_variation_prediction(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                                      Compensator compensator = Compensator::limit);

std::vector<double> quadratic_variation_predictions(const EmpiricalMeasureSeries& series, const TestFunction& phi,
                                                    const std::vector<double>& times,
                                                    Compensator compensator = Compensator::limit);

std::pair<std::vector<double>, std::vector<double>> total_mass_series(const EmpiricalMeasureSeries& series);

std::complex<double> stieltjes_transform(const AtomicMeasure& measure, std::complex<double> z);

/// f(z, t) - f_char(z, t), with f_char the complex-Burgers solution from the
/// series' initial measure computed along characteristics z = w + t f0(w).
std::complex<double> burgers_residual(const EmpiricalMeasureSeries& series, std::complex<double> z, double t);

/// Solves w + t f0(w) = z for w by damped Newton, starting from z.
std::complex<double> characteristic_root(const AtomicMeasure& initial, std::complex<double> z, double t);

/// Q = (N+1)(R-N) / (2N(R-1)).
double offspring_probability(std::size_t alive, std::size_t remaining);

enum class ConditionedDrift {
    local_time_proxy,     // 4/L - L/(1 - D/n), L = 2 <1, mu>, D the deaths so far
    local_time_integral,  // 4/L - L/(1 - int L) with the trapezoid integral of L
    exact_q,              // rate (2Q - 1) per unit mass with Q from (N, R)
};

struct StatisticOptions {
    ConditionedDrift drift = ConditionedDrift::local_time_proxy;
    Compensator compensator = Compensator::finite_n;
};

/// Stopped conditioned statistic with spatial drift 2 H.
double conditioned_statistic(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                             const StatisticOptions& options = {});

double conditioned_qv_prediction(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t);

/// L_t = 2 <1, mu_t>.
double local_time_proxy(const EmpiricalMeasureSeries& series, double t);

/// Truncates at sigma = inf{t : (R_t - 1)/n <= eps_prime}.
EmpiricalMeasureSeries stop_at_sigma(const EmpiricalMeasureSeries& series, double eps_prime);

/// sigma computed from the genealogy alone.
double sigma_of_tree(const MarkedForest& tree, std::size_t n, double eps_prime);

/// P(sup |bridge| <= y) = 1 + 2 sum_{i=1}^{terms} (-1)^i exp(-2 i^2 y^2).
double kolmogorov_cdf(double y, int terms = 50);
/// P(sup excursion <= y) = 1 + 2 sum_{k>=1} (1 - 4 k^2 y^2) exp(-2 k^2 y^2).
double excursion_sup_cdf(double y, int terms = 50);

/// sup_t 2 <1, mu_t> for a conditioned tree with atoms of mass 1/sqrt(n).
double sup_local_time(const MarkedForest& tree, std::size_t n);

struct SupMassReport {
    std::size_t replicas = 0;
    double ks_distance = 0.0;            // against 4 sup |bridge|
    double ks_excursion = 0.0;           // against 2 sup excursion
    double threshold = 0.08;
    double median_empirical = 0.0;
    double median_theory = 0.0;          // median of 4 sup |bridge|
    bool pass = false;
};

SupMassReport sup_mass_test(std::vector<double> sups, double threshold = 0.08);

/// Median m of 4 sup |bridge|: kolmogorov_cdf(m / 4) = 1/2.
double bridge_sup_median();

/// KS distance between an empirical sample and a continuous CDF.
template <typename Cdf>
double ks_distance(std::vector<double> sample, Cdf cdf);

/// Semicircle CDF on [-2, 2].
double semicircle_cdf(double x);

/// KS distance between the atoms of `measure` (equal masses) and the semicircle of radius 2.
double semicircle_ks(const AtomicMeasure& measure);

/// Two-sided normal critical value with Bonferroni correction over `tests`.
double bonferroni_z(double level, std::size_t tests);

// ---------------------------------------------------------------------------
// Monte Carlo drivers.

struct McConfig {
    std::size_t n = 50;
    std::size_t replicas = 10'000;
    std::vector<double> t_list{0.25, 0.5};
    std::vector<TestFunction> phis;
    Beta beta = Beta(8.0);
    std::uint64_t seed = 1;
    double dt = 1e-3;
    double rate = 0.0;   // <= 0 means n
    double alpha = 0.0;  // <= 0 means 1/n
    Compensator compensator = Compensator::finite_n;
    double level = 0.0027;  // two-sided error per band before Bonferroni
    double mass_sigma = 5.0;
    unsigned jobs = 1;
    bool keep_samples = false;
};

struct StatSummary {
    std::string phi;
    double t = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double qv_pred = 0.0;  // replica mean of the predicted quadratic variation
    double m2 = 0.0;       // replica mean of M^2
    double diff_se = 0.0;  // standard error of mean(M^2 - QV)
    double z_mean = 0.0;
    double z_qv = 0.0;
    bool mean_pass = false;
    bool qv_pass = false;
    bool pass = false;
};

struct MassSummary {
    double t = 0.0;
    double mass0 = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double variance_target = 0.0;
    bool mean_pass = false;
    bool variance_pass = false;
};

struct MartingaleReport {
    std::size_t replicas = 0;
    std::size_t n = 0;
    std::string beta;
    std::uint64_t seed = 0;
    double level = 0.0;
    double z_crit = 0.0;
    bool sufficient = false;
    std::vector<StatSummary> stats;
    std::vector<MassSummary> mass;
    /// Per replica: M then QV for every (phi, t) in order, then mass per t.
    std::vector<std::vector<double>> samples;
    bool pass = false;
};

MartingaleReport mc_martingale_test(const McConfig& config);

struct ConditionedMcConfig {
    std::size_t n = 101;
    std::size_t replicas = 5'000;
    double rate = 0.0;   // <= 0 means 2 sqrt(n)
    double alpha = 0.0;  // <= 0 means 2 / sqrt(n)
    Beta beta = Beta::infinite();
    double eps_prime = 0.05;
    std::vector<TestFunction> phis;
    /// Times as fractions of the sigma quantile below.
    std::vector<double> t_fractions{0.5, 0.9};
    double sigma_quantile = 0.2;
    std::uint64_t seed = 1;
    double dt = 1e-3;
    StatisticOptions options;
    double level = 0.0027;
    unsigned jobs = 1;
};

struct ConditionedReport {
    std::size_t replicas = 0;
    std::size_t n = 0;
    double sigma_q = 0.0;
    std::vector<double> t_list;
    double z_crit = 0.0;
    std::vector<StatSummary> stats;
    /// mean(M^2) / mean(QV) for each statistic, a diagnostic of the QV scale.
    std::vector<double> qv_ratio;
    bool pass = false;
};

ConditionedReport conditioned_mc(const ConditionedMcConfig& config);

struct OffspringBin {
    std::size_t alive = 0;
    std::size_t remaining = 0;
    std::size_t deaths = 0;
    std::size_t branches = 0;
    double q = 0.0;
    double z = 0.0;
    bool pass = true;
};

struct OffspringReport {
    std::size_t replicas = 0;
    std::size_t n = 0;
    std::size_t min_count = 0;
    double z_crit = 0.0;
    std::vector<OffspringBin> bins;  // bins with at least min_count deaths
    std::size_t tested = 0;
    std::size_t failed = 0;
    double max_abs_z = 0.0;
    bool pass = false;
};

/// Branch frequencies of conditioned trees binned by (N, R) just before each death.
OffspringReport offspring_test(std::size_t n, std::size_t replicas, double rate, std::uint64_t seed,
                               std::size_t min_count = 30, double level = 0.0027, unsigned jobs = 1);

/// sup_t 2 <1, mu_t> for `replicas` conditioned trees.
std::vector<double> sup_local_time_samples(std::size_t n, std::size_t replicas, double rate, std::uint64_t seed,
                                           unsigned jobs = 1);

/// Deterministic replica seed.
std::uint64_t replica_seed(std::uint64_t seed, std::string_view stage, std::size_t replica);

/// Runs fn(i) for i in [0, count) on `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn fn);

}  // namespace bloewner

#include "bloewner/superproc_impl.hpp"
