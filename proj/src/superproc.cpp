#include "bloewner/superproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "bloewner/errors.hpp"
#include "bloewner/rng.hpp"

namespace bloewner {

std::size_t EmpiricalMeasureSeries::index_at(double t) const {
    if (times.empty()) throw InvalidArgument("empty measure series");
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) throw InvalidArgument("time " + std::to_string(t) + " precedes the series");
    return static_cast<std::size_t>(it - times.begin()) - 1;
}

EmpiricalMeasureSeries empirical_series(const DrivingPath& path, std::size_t n, double scale, double t_max,
                                        bool conditioned, double rate) {
    if (n == 0 || !(scale > 0.0)) throw InvalidArgument("empirical_series needs n >= 1 and a positive scale");
    EmpiricalMeasureSeries s;
    s.n = n;
    s.scale = scale;
    s.beta = path.beta;
    s.alpha = path.alpha.values().empty() ? 0.0 : path.alpha.values().front();
    s.rate = rate;
    s.conditioned = conditioned;

    std::vector<double> deaths;
    deaths.reserve(path.events.size());
    for (const auto& ev : path.events) deaths.push_back(ev.time);
    std::sort(deaths.begin(), deaths.end());
    const auto dead_by = [&](double t) {
        return static_cast<std::size_t>(std::upper_bound(deaths.begin(), deaths.end(), t) - deaths.begin());
    };

    const auto push = [&](double t, std::span<const double> row, std::size_t remaining) {
        AtomicMeasure m;
        m.atoms.reserve(row.size());
        for (double x : row) m.atoms.push_back({x, scale});
        s.times.push_back(t);
        s.measures.push_back(std::move(m));
        s.alive_counts.push_back(row.size());
        if (conditioned) s.remaining_counts.push_back(remaining);
    };

    for (const auto& seg : path.segments) {
        if (seg.t_begin > t_max) break;
        const std::size_t dead = dead_by(seg.t_begin);
        const std::size_t remaining = dead > n ? 0 : n - dead;
        for (std::size_t k = 0; k < seg.rows(); ++k) {
            if (seg.times[k] > t_max) break;
            push(seg.times[k], seg.row(k), remaining);
        }
    }
    if (path.extinct && path.end_time <= t_max) {
        const std::size_t dead = std::min(n, deaths.size());
        push(path.end_time, {}, n - dead);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Test functions.

TestFunction TestFunction::bump(double center, double width) {
    if (!(width > 0.0) || !std::isfinite(center)) throw InvalidArgument("bump needs a finite center and width > 0");
    TestFunction f;
    f.kind = Kind::bump;
    f.center = center;
    f.width = width;
    return f;
}

TestFunction TestFunction::stieltjes_re(std::complex<double> z) {
    if (!(z.imag() > 0.0)) throw InvalidArgument("Stieltjes test functions need Im z > 0");
    TestFunction f;
    f.kind = Kind::stieltjes_re;
    f.pole = z;
    return f;
}

TestFunction TestFunction::stieltjes_im(std::complex<double> z) {
    TestFunction f = stieltjes_re(z);
    f.kind = Kind::stieltjes_im;
    return f;
}

std::vector<TestFunction> TestFunction::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("test function must look like bump:c,w or stieltjes:re,im");
    const std::string kind = text.substr(0, colon);
    const std::string args = text.substr(colon + 1);
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw InvalidArgument("test function '" + text + "' needs two parameters");
    double p = 0.0;
    double q = 0.0;
    try {
        std::size_t used = 0;
        p = std::stod(args.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("trailing");
        const std::string rest = args.substr(comma + 1);
        q = std::stod(rest, &used);
        if (used != rest.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
        throw InvalidArgument("test function '" + text + "' has non-numeric parameters");
    }
    if (kind == "bump") return {bump(p, q)};
    if (kind == "stieltjes") return {stieltjes_re({p, q}), stieltjes_im({p, q})};
    throw InvalidArgument("unknown test function kind '" + kind + "'");
}

namespace {

struct Derivs {
    double f;
    double d1;
    double d2;
};

Derivs eval_all(const TestFunction& phi, double x) {
    if (phi.kind == TestFunction::Kind::bump) {
        const double u = (x - phi.center) / phi.width;
        const double e = std::exp(-0.5 * u * u);
        return {e, -u / phi.width * e, (u * u - 1.0) / (phi.width * phi.width) * e};
    }
    const std::complex<double> r = 1.0 / (phi.pole - x);
    const std::complex<double> r2 = r * r;
    const std::complex<double> r3 = 2.0 * r2 * r;
    if (phi.kind == TestFunction::Kind::stieltjes_re) return {r.real(), r2.real(), r3.real()};
    return {r.imag(), r2.imag(), r3.imag()};
}

}  // namespace

double TestFunction::value(double x) const { return eval_all(*this, x).f; }
double TestFunction::d1(double x) const { return eval_all(*this, x).d1; }
double TestFunction::d2(double x) const { return eval_all(*this, x).d2; }

std::string TestFunction::label() const {
    std::ostringstream os;
    os.precision(6);
    switch (kind) {
        case Kind::bump: os << "bump(" << center << "," << width << ")"; break;
        case Kind::stieltjes_re: os << "re_stieltjes(" << pole.real() << "," << pole.imag() << ")"; break;
        case Kind::stieltjes_im: os << "im_stieltjes(" << pole.real() << "," << pole.imag() << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Quadratic forms.

std::complex<double> stieltjes_transform(const AtomicMeasure& measure, std::complex<double> z) {
    if (!(z.imag() > 0.0)) throw InvalidArgument("stieltjes_transform needs Im z > 0");
    std::complex<double> f = 0.0;
    for (const Atom& a : measure.atoms) f += a.mass / (z - a.position);
    return f;
}

double h_form(const AtomicMeasure& measure, const TestFunction& phi) {
    const auto& atoms = measure.atoms;
    if (phi.kind != TestFunction::Kind::bump) {
        // For phi = 1/(z - x) the double sum factorizes: H = f(z) * sum m/(z - x)^2.
        std::complex<double> f = 0.0;
        std::complex<double> g = 0.0;
        for (const Atom& a : atoms) {
            const std::complex<double> r = 1.0 / (phi.pole - a.position);
            f += a.mass * r;
            g += a.mass * r * r;
        }
        const std::complex<double> h = f * g;
        return phi.kind == TestFunction::Kind::stieltjes_re ? h.real() : h.imag();
    }
    const std::size_t n = atoms.size();
    std::vector<double> d1(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Derivs d = eval_all(phi, atoms[i].position);
        d1[i] = d.d1;
        total += 0.5 * atoms[i].mass * atoms[i].mass * d.d2;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = atoms[i].position - atoms[j].position;
            const double q = dx != 0.0 ? (d1[i] - d1[j]) / dx
                                       : 0.5 * (phi.d2(atoms[i].position) + phi.d2(atoms[j].position));
            row += atoms[j].mass * q;
        }
        total += atoms[i].mass * row;
    }
    return total;
}

double integrate(const AtomicMeasure& measure, const TestFunction& phi) {
    double s = 0.0;
    for (const Atom& a : measure.atoms) s += a.mass * phi.value(a.position);
    return s;
}

namespace {

double integrate_d2(const AtomicMeasure& measure, const TestFunction& phi) {
    double s = 0.0;
    for (const Atom& a : measure.atoms) s += a.mass * phi.d2(a.position);
    return s;
}

double inv_beta(const Beta& beta) { return beta.is_infinite() ? 0.0 : 1.0 / beta.value(); }

void check_series(const EmpiricalMeasureSeries& s, double t) {
    if (s.size() < 10) {
        throw InvalidArgument("measure series has " + std::to_string(s.size()) +
                              " grid points; at least 10 are required for quadrature");
    }
    if (std::isnan(t) || t < 0.0) throw InvalidArgument("statistic time must be nonnegative");
}

// Index of the entry representing time t: an exact grid time, or the end of a
// series that is extinct or stopped before t.
std::size_t grid_index(const EmpiricalMeasureSeries& s, double t) {
    const std::size_t k = s.index_at(t);
    if (k + 1 == s.size()) {
        const bool ended = s.stopped || s.measures.back().empty();
        if (s.times[k] == t || (ended && t >= s.times[k])) return k;
    } else if (s.times[k] == t) {
        return k;
    }
    throw InvalidArgument("time " + std::to_string(t) + " is not on the series grid");
}

template <typename F>
std::vector<double> cumulative_trapezoid(const EmpiricalMeasureSeries& s, std::size_t last, F integrand) {
    std::vector<double> acc(last + 1, 0.0);
    double prev = integrand(std::size_t{0});
    for (std::size_t k = 1; k <= last; ++k) {
        const double cur = integrand(k);
        const double h = s.times[k] - s.times[k - 1];
        acc[k] = acc[k - 1] + (h > 0.0 ? 0.5 * h * (prev + cur) : 0.0);
        prev = cur;
    }
    return acc;
}

template <typename F>
double trapezoid(const EmpiricalMeasureSeries& s, std::size_t last, F integrand) {
    return cumulative_trapezoid(s, last, integrand)[last];
}

}  // namespace

double h0_form(const AtomicMeasure& measure, const TestFunction& phi, double scale) {
    return h_form(measure, phi) - 0.5 * scale * integrate_d2(measure, phi);
}

std::vector<double> unconditioned_statistics(const EmpiricalMeasureSeries& series, const TestFunction& phi,
                                             const std::vector<double>& times, Compensator compensator) {
    std::vector<std::size_t> idx;
    std::size_t last = 0;
    for (double t : times) {
        check_series(series, t);
        idx.push_back(grid_index(series, t));
        last = std::max(last, idx.back());
    }
    const double coeff = compensator == Compensator::finite_n ? inv_beta(series.beta) - 0.5 : 0.0;
    const double lead = compensator == Compensator::finite_n && series.alpha > 0.0
                            ? series.alpha * static_cast<double>(series.n)
                            : 1.0;
    const std::vector<double> drift = cumulative_trapezoid(series, last, [&](std::size_t k) {
        const auto& m = series.measures[k];
        double d = h_form(m, phi);
        if (coeff != 0.0) d += coeff * series.scale * integrate_d2(m, phi);
        return lead * d;
    });
    const double start = integrate(series.measures[0], phi);
    std::vector<double> out;
    for (std::size_t k : idx) out.push_back(k == 0 ? 0.0 : integrate(series.measures[k], phi) - start - drift[k]);
    return out;
}

double unconditioned_statistic(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                               Compensator compensator) {
    return unconditioned_statistics(series, phi, {t}, compensator).front();
}

std::vector<double> quadratic_variation_predictions(const EmpiricalMeasureSeries& series, const TestFunction& phi,
                                                    const std::vector<double>& times, Compensator compensator) {
    std::vector<std::size_t> idx;
    std::size_t last = 0;
    for (double t : times) {
        check_series(series, t);
        idx.push_back(grid_index(series, t));
        last = std::max(last, idx.back());
    }
    const double motion = compensator == Compensator::finite_n && series.alpha > 0.0
                              ? 2.0 * series.alpha * inv_beta(series.beta) * series.scale
                              : 0.0;
    const std::vector<double> qv = cumulative_trapezoid(series, last, [&](std::size_t k) {
        double s = 0.0;
        for (const Atom& a : series.measures[k].atoms) {
            const Derivs d = eval_all(phi, a.position);
            s += a.mass * (d.f * d.f + motion * d.d1 * d.d1);
        }
        return s;
    });
    std::vector<double> out;
    for (std::size_t k : idx) out.push_back(qv[k]);
    return out;
}

double quadratic_variation_prediction(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                                      Compensator compensator) {
    return quadratic_variation_predictions(series, phi, {t}, compensator).front();
}

std::pair<std::vector<double>, std::vector<double>> total_mass_series(const EmpiricalMeasureSeries& series) {
    std::vector<double> mass;
    mass.reserve(series.size());
    for (const auto& m : series.measures) mass.push_back(m.total_mass());
    return {series.times, mass};
}

// ---------------------------------------------------------------------------
// Burgers.

std::complex<double> characteristic_root(const AtomicMeasure& initial, std::complex<double> z, double t) {
    if (!(z.imag() > 0.0)) throw InvalidArgument("characteristic_root needs Im z > 0");
    if (t == 0.0) return z;
    const auto residual = [&](std::complex<double> w) {
        std::complex<double> f = 0.0;
        std::complex<double> df = 0.0;
        for (const Atom& a : initial.atoms) {
            const std::complex<double> r = 1.0 / (w - a.position);
            f += a.mass * r;
            df -= a.mass * r * r;
        }
        return std::pair{w + t * f - z, 1.0 + t * df};
    };
    std::complex<double> w = z;
    auto [F, dF] = residual(w);
    const double tol = 1e-14 * (1.0 + std::abs(z));
    for (int it = 0; it < 200; ++it) {
        if (std::abs(F) <= tol) return w;
        std::complex<double> step = F / dF;
        bool improved = false;
        for (int h = 0; h < 50; ++h) {
            const std::complex<double> trial = w - step;
            if (trial.imag() > 0.0) {
                const auto [Ft, dFt] = residual(trial);
                if (std::abs(Ft) < std::abs(F)) {
                    w = trial;
                    F = Ft;
                    dF = dFt;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    if (std::abs(F) <= 1e-10 * (1.0 + std::abs(z))) return w;
    std::ostringstream os;
    os << "characteristic root finder diverged at z=" << z << ", t=" << t << " (|residual|=" << std::abs(F) << ")";
    throw NumericalFailure(os.str());
}

std::complex<double> burgers_residual(const EmpiricalMeasureSeries& series, std::complex<double> z, double t) {
    if (series.size() == 0) throw InvalidArgument("empty measure series");
    const std::size_t k = grid_index(series, t);
    const std::complex<double> f = stieltjes_transform(series.measures[k], z);
    const std::complex<double> w = characteristic_root(series.measures[0], z, t);
    return f - stieltjes_transform(series.measures[0], w);
}

// ---------------------------------------------------------------------------
// Conditioned system.

double offspring_probability(std::size_t alive, std::size_t remaining) {
    if (alive == 0 || alive > remaining) {
        throw InvalidArgument("offspring_probability needs 1 <= N <= R (got N=" + std::to_string(alive) +
                              ", R=" + std::to_string(remaining) + ")");
    }
    if (remaining == 1) return 0.0;  // N = R = 1: the last individual
    const double n = static_cast<double>(alive);
    const double r = static_cast<double>(remaining);
    const double q = (n + 1.0) * (r - n) / (2.0 * n * (r - 1.0));
    if (q < 0.0 || q > 1.0) {
        throw InvalidArgument("offspring probability outside [0,1] for N=" + std::to_string(alive) +
                              ", R=" + std::to_string(remaining));
    }
    return q;
}

double local_time_proxy(const EmpiricalMeasureSeries& series, double t) {
    const std::size_t k = series.index_at(t);
    return 2.0 * series.measures[k].total_mass();
}

double conditioned_statistic(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t,
                             const StatisticOptions& options) {
    if (!series.conditioned) throw InvalidArgument("conditioned_statistic needs a conditioned series");
    if (!series.stopped) throw InvalidArgument("conditioned_statistic needs a series stopped at sigma");
    if (t == 0.0) return 0.0;
    check_series(series, t);
    const std::size_t last = grid_index(series, t);
    const double coeff = options.compensator == Compensator::finite_n ? inv_beta(series.beta) - 0.5 : 0.0;
    const double lead = options.compensator == Compensator::finite_n && series.alpha > 0.0
                            ? series.alpha / series.scale
                            : 2.0;
    const double sqrt_n = std::sqrt(static_cast<double>(series.n));

    // Running integral of L for the proxy drift.
    std::vector<double> ell(last + 1);
    for (std::size_t k = 0; k <= last; ++k) ell[k] = 2.0 * series.measures[k].total_mass();
    std::vector<double> cum(last + 1, 0.0);
    for (std::size_t k = 1; k <= last; ++k) {
        cum[k] = cum[k - 1] + 0.5 * (series.times[k] - series.times[k - 1]) * (ell[k] + ell[k - 1]);
    }

    const double drift = trapezoid(series, last, [&](std::size_t k) {
        const auto& m = series.measures[k];
        if (m.empty()) return 0.0;
        double spatial = h_form(m, phi);
        if (coeff != 0.0) spatial += coeff * series.scale * integrate_d2(m, phi);
        double factor = 0.0;
        if (options.drift == ConditionedDrift::local_time_proxy) {
            const double denom = static_cast<double>(series.remaining_counts[k]) / static_cast<double>(series.n);
            if (!(denom > 0.0)) {
                throw NumericalFailure("local-time proxy drift is singular at t=" + std::to_string(series.times[k]) +
                                       " (no remaining individuals before sigma)");
            }
            factor = 4.0 / ell[k] - ell[k] / denom;
        } else if (options.drift == ConditionedDrift::local_time_integral) {
            const double denom = 1.0 - cum[k];
            if (!(denom > 0.0)) {
                throw NumericalFailure("local-time proxy drift is singular at t=" + std::to_string(series.times[k]) +
                                       " (integral of L reached " + std::to_string(cum[k]) + " before sigma)");
            }
            factor = 4.0 / ell[k] - ell[k] / denom;
        } else {
            const double q = offspring_probability(series.alive_counts[k], series.remaining_counts[k]);
            const double rate = series.rate > 0.0 ? series.rate : 2.0 * sqrt_n;
            factor = rate * (2.0 * q - 1.0);
        }
        return lead * spatial + factor * integrate(m, phi);
    });
    return integrate(series.measures[last], phi) - integrate(series.measures[0], phi) - drift;
}

double conditioned_qv_prediction(const EmpiricalMeasureSeries& series, const TestFunction& phi, double t) {
    check_series(series, t);
    const std::size_t last = grid_index(series, t);
    return trapezoid(series, last, [&](std::size_t k) {
        double s = 0.0;
        for (const Atom& a : series.measures[k].atoms) {
            const double v = phi.value(a.position);
            s += a.mass * v * v;
        }
        return s;
    });
}

EmpiricalMeasureSeries stop_at_sigma(const EmpiricalMeasureSeries& series, double eps_prime) {
    if (!series.conditioned || series.remaining_counts.size() != series.size()) {
        throw InvalidArgument("stop_at_sigma needs a conditioned series with remaining counts");
    }
    EmpiricalMeasureSeries out = series;
    out.stopped = true;
    const double n = static_cast<double>(series.n);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double level = (static_cast<double>(series.remaining_counts[k]) - 1.0) / n;
        if (level <= eps_prime) {
            out.sigma = series.times[k];
            out.times.resize(k + 1);
            out.measures.resize(k + 1);
            out.alive_counts.resize(k + 1);
            out.remaining_counts.resize(k + 1);
            return out;
        }
    }
    return out;
}

double sigma_of_tree(const MarkedForest& tree, std::size_t n, double eps_prime) {
    const double nn = static_cast<double>(n);
    double remaining = nn;
    if ((remaining - 1.0) / nn <= eps_prime) return 0.0;
    std::vector<double> deaths;
    for (const auto& v : tree.vertices()) deaths.push_back(v.death);
    std::sort(deaths.begin(), deaths.end());
    for (double d : deaths) {
        remaining -= 1.0;
        if ((remaining - 1.0) / nn <= eps_prime) return d;
    }
    return std::numeric_limits<double>::infinity();
}

double kolmogorov_cdf(double y, int terms) {
    if (!(y > 0.0)) return 0.0;
    double s = 1.0;
    for (int i = 1; i <= terms; ++i) {
        const double term = 2.0 * std::exp(-2.0 * i * i * y * y);
        s += (i % 2 == 1) ? -term : term;
    }
    return std::clamp(s, 0.0, 1.0);
}

double excursion_sup_cdf(double y, int terms) {
    if (!(y > 0.0)) return 0.0;
    double s = 1.0;
    for (int k = 1; k <= terms; ++k) {
        const double kk = static_cast<double>(k) * k;
        s += 2.0 * (1.0 - 4.0 * kk * y * y) * std::exp(-2.0 * kk * y * y);
    }
    return std::clamp(s, 0.0, 1.0);
}

double sup_local_time(const MarkedForest& tree, std::size_t n) {
    std::vector<std::pair<double, int>> deaths;
    for (const auto& v : tree.vertices()) deaths.emplace_back(v.death, v.children.empty() ? -1 : 1);
    std::sort(deaths.begin(), deaths.end());
    long alive = static_cast<long>(tree.tree_count());
    long best = alive;
    for (const auto& [t, delta] : deaths) {
        alive += delta;
        best = std::max(best, alive);
    }
    return 2.0 * static_cast<double>(best) / std::sqrt(static_cast<double>(n));
}

double bridge_sup_median() {
    double lo = 0.1;
    double hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kolmogorov_cdf(mid / 4.0) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

SupMassReport sup_mass_test(std::vector<double> sups, double threshold) {
    if (sups.size() < 1000) {
        throw InvalidArgument("sup_mass_test needs at least 1000 replicas (got " + std::to_string(sups.size()) + ")");
    }
    SupMassReport r;
    r.replicas = sups.size();
    r.threshold = threshold;
    r.ks_distance = ks_distance(sups, [](double x) { return kolmogorov_cdf(x / 4.0); });
    r.ks_excursion = ks_distance(sups, [](double x) { return excursion_sup_cdf(x / 2.0); });
    std::sort(sups.begin(), sups.end());
    const std::size_t m = sups.size();
    r.median_empirical = m % 2 == 1 ? sups[m / 2] : 0.5 * (sups[m / 2 - 1] + sups[m / 2]);
    r.median_theory = bridge_sup_median();
    r.pass = r.ks_distance <= threshold;
    return r;
}

double semicircle_cdf(double x) {
    if (x <= -2.0) return 0.0;
    if (x >= 2.0) return 1.0;
    return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(x / 2.0) / std::numbers::pi;
}

double semicircle_ks(const AtomicMeasure& measure) {
    std::vector<double> xs;
    for (const Atom& a : measure.atoms) xs.push_back(a.position);
    return ks_distance(xs, semicircle_cdf);
}

double bonferroni_z(double level, std::size_t tests) {
    if (!(level > 0.0 && level < 1.0) || tests == 0) throw InvalidArgument("bonferroni_z needs 0 < level < 1, tests >= 1");
    const boost::math::normal_distribution<double> normal;
    return boost::math::quantile(normal, 1.0 - level / (2.0 * static_cast<double>(tests)));
}

std::uint64_t replica_seed(std::uint64_t seed, std::string_view stage, std::size_t replica) {
    return mix_key(stage_key(seed, stage), static_cast<std::uint64_t>(replica));
}

// ---------------------------------------------------------------------------
// Monte Carlo.

namespace {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return m;
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return m;
}

StatSummary summarize(const std::string& name, double t, const std::vector<double>& ms, const std::vector<double>& qvs,
                      double z) {
    StatSummary s;
    s.phi = name;
    s.t = t;
    const Moments mm = moments(ms);
    s.mean = mm.mean;
    s.se = mm.se;
    s.ci_low = mm.mean - z * mm.se;
    s.ci_high = mm.mean + z * mm.se;
    std::vector<double> sq(ms.size());
    std::vector<double> diff(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        sq[i] = ms[i] * ms[i];
        diff[i] = sq[i] - qvs[i];
    }
    s.m2 = moments(sq).mean;
    s.qv_pred = moments(qvs).mean;
    const Moments dm = moments(diff);
    s.diff_se = dm.se;
    s.z_mean = mm.se > 0.0 ? mm.mean / mm.se : 0.0;
    s.z_qv = dm.se > 0.0 ? dm.mean / dm.se : 0.0;
    s.mean_pass = std::abs(mm.mean) <= z * mm.se;
    s.qv_pass = std::abs(dm.mean) <= z * dm.se;
    s.pass = s.mean_pass && s.qv_pass;
    return s;
}

std::string beta_text(const Beta& b) {
    if (b.is_infinite()) return "inf";
    std::ostringstream os;
    os << b.value();
    return os.str();
}

}  // namespace

MartingaleReport mc_martingale_test(const McConfig& config) {
    if (config.n < 10) throw InvalidArgument("mc_martingale_test needs n >= 10");
    if (config.phis.empty() || config.t_list.empty()) throw InvalidArgument("mc_martingale_test needs phis and times");
    for (double t : config.t_list) {
        if (!(t > 0.0)) throw InvalidArgument("statistic times must be positive");
    }
    MartingaleReport rep;
    rep.replicas = config.replicas;
    rep.n = config.n;
    rep.beta = beta_text(config.beta);
    rep.seed = config.seed;
    rep.level = config.level;
    rep.sufficient = config.replicas >= 100;
    const std::size_t pairs = config.phis.size() * config.t_list.size();
    rep.z_crit = bonferroni_z(config.level, pairs);

    const double n = static_cast<double>(config.n);
    const double rate = config.rate > 0.0 ? config.rate : n;
    const double alpha = config.alpha > 0.0 ? config.alpha : 1.0 / n;
    const double t_max = *std::max_element(config.t_list.begin(), config.t_list.end());
    const std::size_t width = 2 * pairs + config.t_list.size();
    std::vector<std::vector<double>> rows(config.replicas, std::vector<double>(width));

    parallel_for(config.replicas, config.jobs, [&](std::size_t r) {
        GwOptions gw;
        gw.horizon = t_max;
        const MarkedForest forest = sample_gw_forest(config.n, rate, replica_seed(config.seed, "genealogy", r), gw);
        const std::vector<double> x0(config.n, 0.0);
        FlowConfig fc;
        fc.dt_max = config.dt;
        fc.tolerance = 0.0;
        fc.horizon = t_max;
        fc.output_times = config.t_list;
        const DrivingPath path = dyson_flow(forest, AlphaSchedule::constant(alpha), config.beta, x0, fc,
                                            replica_seed(config.seed, "drive", r));
        const EmpiricalMeasureSeries series = empirical_series(path, config.n, 1.0 / n, t_max, false, rate);
        auto& row = rows[r];
        std::size_t c = 0;
        for (const auto& phi : config.phis) {
            const auto ms = unconditioned_statistics(series, phi, config.t_list, config.compensator);
            const auto qs = quadratic_variation_predictions(series, phi, config.t_list, config.compensator);
            for (std::size_t i = 0; i < ms.size(); ++i) {
                row[c++] = ms[i];
                row[c++] = qs[i];
            }
        }
        for (double t : config.t_list) {
            const std::size_t k = grid_index(series, t);
            row[c++] = series.measures[k].total_mass();
        }
    });

    std::size_t c = 0;
    for (const auto& phi : config.phis) {
        for (double t : config.t_list) {
            std::vector<double> ms(config.replicas);
            std::vector<double> qs(config.replicas);
            for (std::size_t r = 0; r < config.replicas; ++r) {
                ms[r] = rows[r][c];
                qs[r] = rows[r][c + 1];
            }
            c += 2;
            rep.stats.push_back(summarize(phi.label(), t, ms, qs, rep.z_crit));
        }
    }
    const double mass0 = 1.0;  // n initial individuals of mass 1/n
    for (double t : config.t_list) {
        MassSummary ms;
        ms.t = t;
        ms.mass0 = mass0;
        std::vector<double> m(config.replicas);
        std::vector<double> v(config.replicas);
        for (std::size_t r = 0; r < config.replicas; ++r) {
            m[r] = rows[r][c];
            v[r] = (m[r] - mass0) * (m[r] - mass0);
        }
        ++c;
        const Moments mm = moments(m);
        const Moments vm = moments(v);
        ms.mean = mm.mean;
        ms.se = mm.se;
        ms.variance = vm.mean;
        ms.variance_se = vm.se;
        ms.variance_target = t * mass0;
        ms.mean_pass = std::abs(mm.mean - mass0) <= 3.0 * mm.se;
        ms.variance_pass = std::abs(vm.mean - ms.variance_target) <= config.mass_sigma * vm.se;
        rep.mass.push_back(ms);
    }
    rep.pass = rep.sufficient;
    for (const auto& s : rep.stats) rep.pass = rep.pass && s.pass;
    for (const auto& m : rep.mass) rep.pass = rep.pass && m.mean_pass && m.variance_pass;
    if (config.keep_samples) rep.samples = std::move(rows);
    return rep;
}

ConditionedReport conditioned_mc(const ConditionedMcConfig& config) {
    if (config.n < 3 || config.n % 2 == 0) throw InvalidArgument("conditioned_mc needs odd n >= 3");
    if (config.phis.empty() || config.t_fractions.empty()) throw InvalidArgument("conditioned_mc needs phis and times");
    if (config.replicas < 2) throw InvalidArgument("conditioned_mc needs at least two replicas");
    ConditionedReport rep;
    rep.replicas = config.replicas;
    rep.n = config.n;
    const double sqrt_n = std::sqrt(static_cast<double>(config.n));
    const double rate = config.rate > 0.0 ? config.rate : 2.0 * sqrt_n;
    const double alpha = config.alpha > 0.0 ? config.alpha : 2.0 / sqrt_n;

    std::vector<MarkedPlaneTree> trees;
    trees.reserve(config.replicas);
    std::vector<double> sigmas(config.replicas);
    for (std::size_t r = 0; r < config.replicas; ++r) {
        trees.push_back(sample_conditioned_tree(config.n, rate, replica_seed(config.seed, "tree", r)));
        sigmas[r] = sigma_of_tree(trees.back(), config.n, config.eps_prime);
    }
    std::vector<double> sorted = sigmas;
    std::sort(sorted.begin(), sorted.end());
    const double pos = config.sigma_quantile * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    rep.sigma_q = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    for (double f : config.t_fractions) rep.t_list.push_back(f * rep.sigma_q);
    const double t_max = *std::max_element(rep.t_list.begin(), rep.t_list.end());
    const std::size_t pairs = config.phis.size() * rep.t_list.size();
    rep.z_crit = bonferroni_z(config.level, pairs);

    std::vector<std::vector<double>> rows(config.replicas, std::vector<double>(2 * pairs));
    parallel_for(config.replicas, config.jobs, [&](std::size_t r) {
        FlowConfig fc;
        fc.dt_max = config.dt;
        fc.tolerance = 0.0;
        fc.horizon = t_max;
        fc.output_times = rep.t_list;
        const std::vector<double> x0{0.0};
        const DrivingPath path = dyson_flow(trees[r], AlphaSchedule::constant(alpha), config.beta, x0, fc,
                                            replica_seed(config.seed, "drive", r));
        const EmpiricalMeasureSeries full = empirical_series(path, config.n, 1.0 / sqrt_n, t_max, true, rate);
        const EmpiricalMeasureSeries series = stop_at_sigma(full, config.eps_prime);
        std::size_t c = 0;
        for (const auto& phi : config.phis) {
            for (double t : rep.t_list) {
                rows[r][c++] = conditioned_statistic(series, phi, t, config.options);
                rows[r][c++] = conditioned_qv_prediction(series, phi, t);
            }
        }
    });

    std::size_t c = 0;
    for (const auto& phi : config.phis) {
        for (double t : rep.t_list) {
            std::vector<double> ms(config.replicas);
            std::vector<double> qs(config.replicas);
            for (std::size_t r = 0; r < config.replicas; ++r) {
                ms[r] = rows[r][c];
                qs[r] = rows[r][c + 1];
            }
            c += 2;
            StatSummary s = summarize(phi.label(), t, ms, qs, rep.z_crit);
            rep.qv_ratio.push_back(s.qv_pred > 0.0 ? s.m2 / s.qv_pred : 0.0);
            rep.stats.push_back(std::move(s));
        }
    }
    rep.pass = true;
    for (const auto& s : rep.stats) rep.pass = rep.pass && s.pass;
    return rep;
}

OffspringReport offspring_test(std::size_t n, std::size_t replicas, double rate, std::uint64_t seed,
                               std::size_t min_count, double level, unsigned jobs) {
    if (!(rate > 0.0)) rate = 2.0 * std::sqrt(static_cast<double>(n));
    struct Record {
        std::uint32_t alive;
        std::uint32_t remaining;
        bool branched;
    };
    std::vector<std::vector<Record>> per(replicas);
    parallel_for(replicas, jobs, [&](std::size_t r) {
        const MarkedPlaneTree tree = sample_conditioned_tree(n, rate, replica_seed(seed, "tree", r));
        std::vector<std::pair<double, bool>> deaths;
        for (const auto& v : tree.forest().vertices()) deaths.emplace_back(v.death, !v.children.empty());
        std::sort(deaths.begin(), deaths.end());
        std::uint32_t alive = 1;
        auto remaining = static_cast<std::uint32_t>(n);
        for (const auto& [t, branched] : deaths) {
            per[r].push_back({alive, remaining, branched});
            --remaining;
            alive = branched ? alive + 1 : alive - 1;
        }
    });
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& recs : per) {
        for (const Record& rc : recs) {
            auto& c = counts[{rc.alive, rc.remaining}];
            ++c.first;
            if (rc.branched) ++c.second;
        }
    }
    OffspringReport rep;
    rep.replicas = replicas;
    rep.n = n;
    rep.min_count = min_count;
    for (const auto& [key, c] : counts) {
        if (c.first < min_count) continue;
        OffspringBin b;
        b.alive = key.first;
        b.remaining = key.second;
        b.deaths = c.first;
        b.branches = c.second;
        b.q = offspring_probability(b.alive, b.remaining);
        rep.bins.push_back(b);
    }
    rep.tested = rep.bins.size();
    rep.z_crit = rep.tested > 0 ? bonferroni_z(level, rep.tested) : 0.0;
    for (auto& b : rep.bins) {
        const double cnt = static_cast<double>(b.deaths);
        const double expect = cnt * b.q;
        const double var = cnt * b.q * (1.0 - b.q);
        if (var == 0.0) {
            b.z = 0.0;
            b.pass = static_cast<double>(b.branches) == expect;
        } else {
            b.z = (static_cast<double>(b.branches) - expect) / std::sqrt(var);
            b.pass = std::abs(b.z) <= rep.z_crit;
        }
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(b.z));
        if (!b.pass) ++rep.failed;
    }
    rep.pass = rep.tested > 0 && rep.failed == 0;
    return rep;
}

std::vector<double> sup_local_time_samples(std::size_t n, std::size_t replicas, double rate, std::uint64_t seed,
                                           unsigned jobs) {
    if (!(rate > 0.0)) rate = 2.0 * std::sqrt(static_cast<double>(n));
    std::vector<double> out(replicas);
    parallel_for(replicas, jobs, [&](std::size_t r) {
        out[r] = sup_local_time(sample_conditioned_tree(n, rate, replica_seed(seed, "tree", r)), n);
    });
    return out;
}

}  // namespace bloewner
