#include "bloewner/driver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "bloewner/errors.hpp"
#include "bloewner/rng.hpp"

namespace bloewner {

// ---------------------------------------------------------------------------
// Small value types

Beta::Beta(double value) : value_(value), infinite_(false) {
    if (std::isnan(value) || value <= 0.0) throw InvalidArgument("beta must be positive");
    if (std::isinf(value)) infinite_ = true;
}

double Beta::noise_scale(double alpha) const { return infinite_ ? 0.0 : std::sqrt(2.0 * alpha / value_); }

AlphaSchedule AlphaSchedule::constant(double value) { return AlphaSchedule({}, {value}); }

AlphaSchedule::AlphaSchedule(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() != breakpoints_.size() + 1) {
        throw InvalidArgument("alpha schedule needs exactly one more value than breakpoints");
    }
    for (double v : values_) {
        if (!std::isfinite(v) || v <= 0.0) throw InvalidArgument("alpha values must be finite and positive");
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > breakpoints_[i - 1])) {
            throw InvalidArgument("alpha breakpoints must be strictly increasing");
        }
    }
}

double AlphaSchedule::at(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double AtomicMeasure::total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    return m;
}

void PathSegment::interpolate(double t, std::span<double> out) const {
    const std::size_t w = width();
    if (t <= times.front()) {
        std::copy_n(positions.begin(), w, out.begin());
        return;
    }
    if (t >= times.back()) {
        std::copy_n(positions.begin() + static_cast<std::ptrdiff_t>((rows() - 1) * w), w, out.begin());
        return;
    }
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin());
    const double lam = (t - times[k - 1]) / (times[k] - times[k - 1]);
    const double* a = positions.data() + (k - 1) * w;
    const double* b = positions.data() + k * w;
    for (std::size_t j = 0; j < w; ++j) out[j] = a[j] + lam * (b[j] - a[j]);
}

const PathSegment* DrivingPath::segment_at(double t) const {
    if (segments.empty() || t < segments.front().t_begin) return nullptr;
    auto it = std::upper_bound(segments.begin(), segments.end(), t,
                               [](double v, const PathSegment& s) { return v < s.t_begin; });
    const PathSegment& s = *(it - 1);
    if (t < s.t_end) return &s;
    if (&s == &segments.back() && t == s.t_end) return &s;
    return nullptr;
}

AtomicMeasure DrivingPath::measure_at(double t) const {
    if (std::isnan(t) || t < 0.0) throw InvalidArgument("measure_at: time must be nonnegative");
    AtomicMeasure m;
    if (t >= end_time && extinct) return m;
    if (t > end_time) {
        throw InvalidArgument("measure_at: time " + std::to_string(t) + " is past the simulated horizon " +
                              std::to_string(end_time));
    }
    const PathSegment* s = segment_at(t);
    if (s == nullptr) return m;
    std::vector<double> x(s->width());
    s->interpolate(t, x);
    m.atoms.reserve(x.size());
    for (double p : x) m.atoms.push_back({p, mass_per_atom});
    return m;
}

double DrivingPath::integrated_mass(double t) const {
    double total = 0.0;
    for (const auto& s : segments) {
        const double hi = std::min(t, s.t_end);
        if (hi <= s.t_begin) break;
        total += (hi - s.t_begin) * static_cast<double>(s.width());
    }
    return total * mass_per_atom;
}

std::size_t DrivingPath::max_alive() const {
    std::size_t m = 0;
    for (const auto& s : segments) m = std::max(m, s.width());
    return m;
}

// ---------------------------------------------------------------------------
// Closed forms and building blocks

std::pair<double, double> two_particle_exact(double alpha, double t) {
    if (!(alpha > 0.0) || !(t >= 0.0)) throw InvalidArgument("two_particle_exact needs alpha > 0, t >= 0");
    const double r = std::sqrt(alpha * t);
    return {-r, r};
}

void coulomb_drift(std::span<const double> x, double alpha, std::span<double> out) {
    const std::size_t n = x.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double xj = x[j];
        double acc = out[j];
        for (std::size_t k = j + 1; k < n; ++k) {
            const double f = alpha / (xj - x[k]);
            acc += f;
            out[k] -= f;
        }
        out[j] = acc;
    }
}

std::vector<double> hermite_zeros(std::size_t m) {
    if (m == 0) return {};
    if (m == 1) return {0.0};
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(m - 1));
    for (std::size_t k = 1; k < m; ++k) sub[static_cast<Eigen::Index>(k - 1)] = std::sqrt(0.5 * static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    std::vector<double> z(solver.eigenvalues().data(), solver.eigenvalues().data() + m);
    // Symmetrize against rounding so clusters split exactly symmetrically.
    for (std::size_t i = 0; i < m / 2; ++i) {
        const double v = 0.5 * (z[m - 1 - i] - z[i]);
        z[i] = -v;
        z[m - 1 - i] = v;
    }
    if (m % 2 == 1) z[m / 2] = 0.0;
    return z;
}

std::vector<double> branch_startup_step(std::span<const double> positions, std::size_t k, double alpha,
                                        double dt) {
    const std::size_t n = positions.size();
    if (k + 1 >= n) throw InvalidArgument("branch_startup_step: branching index out of range");
    if (positions[k] != positions[k + 1]) {
        throw InvalidArgument("branch_startup_step: positions[k] and positions[k+1] must coincide");
    }
    for (std::size_t j = 0; j + 1 < n; ++j) {
        if (j != k && positions[j] == positions[j + 1]) {
            throw InvalidArgument("branch_startup_step: more than one coincident pair");
        }
    }
    std::vector<double> out(positions.begin(), positions.end());
    if (dt == 0.0) return out;
    const double split = std::sqrt(alpha * dt);
    const double c = positions[k];
    double frozen = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == k || j == k + 1) continue;
        frozen += alpha / (c - positions[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (j == k || j == k + 1) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i != j) d += alpha / (positions[j] - positions[i]);
        }
        out[j] = positions[j] + dt * d;
    }
    out[k] = c - split + dt * frozen;
    out[k + 1] = c + split + dt * frozen;
    return out;
}

AlphaSchedule angle_schedule(const MarkedForest& forest, std::span<const double> angles) {
    if (angles.size() != forest.size()) throw InvalidArgument("angle_schedule: one angle per vertex required");
    for (double th : angles) {
        if (!(th > 0.0 && th < std::numbers::pi / 2)) {
            throw InvalidArgument("angle_schedule: every angle must lie in (0, pi/2)");
        }
    }
    std::vector<std::pair<double, VertexId>> deaths;
    for (std::size_t i = 0; i < forest.size(); ++i) {
        deaths.emplace_back(forest.vertex(static_cast<VertexId>(i)).death, static_cast<VertexId>(i));
    }
    std::sort(deaths.begin(), deaths.end());
    std::vector<double> bps;
    std::vector<double> vals;
    const auto alpha_of = [&](VertexId v) { return std::numbers::pi / angles[v] - 2.0; };
    vals.push_back(alpha_of(deaths.front().second));
    for (const auto& [d, v] : deaths) {
        bps.push_back(d);
        vals.push_back(alpha_of(v));
    }
    return AlphaSchedule(std::move(bps), std::move(vals));
}

DrivingPath explicit_path(std::vector<double> times, std::size_t width,
                          const std::vector<std::vector<double>>& trajectories, double mass_per_atom) {
    if (times.size() < 2 || trajectories.size() != width) {
        throw InvalidArgument("explicit_path: need >= 2 times and one trajectory per atom");
    }
    PathSegment seg;
    seg.t_begin = times.front();
    seg.t_end = times.back();
    seg.alpha = 1.0;
    for (std::size_t j = 0; j < width; ++j) seg.alive.push_back(static_cast<VertexId>(j));
    seg.positions.resize(times.size() * width);
    for (std::size_t k = 0; k < times.size(); ++k) {
        for (std::size_t j = 0; j < width; ++j) {
            if (trajectories[j].size() != times.size()) throw InvalidArgument("explicit_path: ragged trajectory");
            seg.positions[k * width + j] = trajectories[j][k];
        }
    }
    seg.times = std::move(times);
    DrivingPath path;
    path.end_time = seg.t_end;
    path.extinct = false;
    path.mass_per_atom = mass_per_atom;
    path.segments.push_back(std::move(seg));
    return path;
}

// ---------------------------------------------------------------------------
// Flow engine shared by the Coulomb and Dyson integrators

namespace {

bool strictly_increasing(std::span<const double> x) {
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!std::isfinite(x[j])) return false;
        if (j > 0 && !(x[j] > x[j - 1])) return false;
    }
    return true;
}

// Runs [begin, end) of exactly equal neighbours with length >= 2.
std::vector<std::pair<std::size_t, std::size_t>> coincident_runs(std::span<const double> x) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < x.size()) {
        std::size_t j = i + 1;
        while (j < x.size() && x[j] == x[i]) ++j;
        if (j - i >= 2) runs.emplace_back(i, j);
        i = j;
    }
    return runs;
}

class FlowRunner {
  public:
    FlowRunner(const MarkedForest& forest, const AlphaSchedule& alpha, std::span<const double> x0,
               const FlowConfig& config, Beta beta, std::uint64_t seed)
        : forest_(forest), alpha_(alpha), config_(config), beta_(beta), seed_(seed) {
        if (x0.size() != forest.tree_count()) {
            throw InvalidArgument("x0 must have one position per initial individual (" +
                                  std::to_string(forest.tree_count()) + ")");
        }
        for (std::size_t j = 0; j < x0.size(); ++j) {
            if (!std::isfinite(x0[j])) throw InvalidArgument("x0 must be finite");
            if (j > 0 && x0[j] < x0[j - 1]) throw InvalidArgument("x0 must be nondecreasing");
        }
        if (!(config.dt_max > 0.0) || !std::isfinite(config.dt_max)) {
            throw InvalidArgument("dt_max must be positive and finite");
        }
        if (!(config.mass_per_atom > 0.0)) throw InvalidArgument("mass_per_atom must be positive");
        alive_ = forest.roots();
        x_.assign(x0.begin(), x0.end());
        if (!beta_.is_infinite()) {
            for (VertexId v : alive_) streams_.emplace_back(stream_key(v));
        }
    }

    DrivingPath run() {
        DrivingPath path;
        path.beta = beta_;
        path.alpha = alpha_;
        path.mass_per_atom = config_.mass_per_atom;
        path.seed = seed_;
        path.dt_max = config_.dt_max;

        const double extinction = extinction_time(forest_);
        const double t_final = std::min(extinction, config_.horizon);
        if (!(t_final > 0.0)) throw InvalidArgument("flow horizon must be positive");

        std::vector<std::pair<double, VertexId>> deaths;
        for (std::size_t i = 0; i < forest_.size(); ++i) {
            deaths.emplace_back(forest_.vertex(static_cast<VertexId>(i)).death, static_cast<VertexId>(i));
        }
        std::sort(deaths.begin(), deaths.end());

        std::vector<double> bounds;
        for (const auto& d : deaths) bounds.push_back(d.first);
        for (double b : alpha_.breakpoints()) bounds.push_back(b);
        for (double b : config_.output_times) bounds.push_back(b);
        bounds.push_back(t_final);
        std::sort(bounds.begin(), bounds.end());
        bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
        bounds.erase(std::remove_if(bounds.begin(), bounds.end(),
                                    [&](double b) { return !(b > 0.0) || b > t_final; }),
                     bounds.end());

        double t = 0.0;
        std::size_t next_death = 0;
        for (double b : bounds) {
            if (alive_.empty()) break;
            PathSegment seg;
            seg.t_begin = t;
            seg.t_end = b;
            seg.alpha = alpha_.at(t);
            seg.alive = alive_;
            integrate_segment(seg);
            path.segments.push_back(std::move(seg));
            t = b;
            while (next_death < deaths.size() && deaths[next_death].first == b) {
                apply_death(deaths[next_death].second, b, path.events);
                ++next_death;
            }
        }
        path.end_time = t_final;
        path.extinct = (t_final == extinction);
        return path;
    }

  private:
    std::uint64_t stream_key(VertexId v) const {
        return mix_key(stage_key(seed_, "drive"), forest_.vertex(v).path_hash);
    }

    void apply_death(VertexId v, double t, std::vector<PathEvent>& events) {
        const auto it = std::find(alive_.begin(), alive_.end(), v);
        if (it == alive_.end()) throw NumericalFailure("internal: dying vertex is not alive");
        const auto idx = static_cast<std::size_t>(it - alive_.begin());
        const Vertex& vx = forest_.vertex(v);
        const double pos = x_[idx];
        const bool stochastic = !beta_.is_infinite();
        if (vx.children.empty()) {
            events.push_back({t, EventKind::death, v, pos});
            alive_.erase(it);
            x_.erase(x_.begin() + static_cast<std::ptrdiff_t>(idx));
            if (stochastic) streams_.erase(streams_.begin() + static_cast<std::ptrdiff_t>(idx));
            return;
        }
        events.push_back({t, EventKind::branch, v, pos});
        alive_[idx] = vx.children[0];
        alive_.insert(alive_.begin() + static_cast<std::ptrdiff_t>(idx + 1), vx.children[1]);
        x_.insert(x_.begin() + static_cast<std::ptrdiff_t>(idx + 1), pos);
        if (stochastic) {
            streams_[idx] = GaussianStream(stream_key(vx.children[0]));
            streams_.insert(streams_.begin() + static_cast<std::ptrdiff_t>(idx + 1),
                            GaussianStream(stream_key(vx.children[1])));
        }
    }

    [[noreturn]] void underflow(double t, double h, const PathSegment& seg) const {
        std::ostringstream os;
        os.precision(17);
        os << "flow step underflow at t=" << t << " (step " << h << " < min_step " << config_.min_step
           << "; particles=" << x_.size() << ", alpha=" << seg.alpha << ", beta=" << beta_.value()
           << ", dt_max=" << config_.dt_max << ")";
        throw NumericalFailure(os.str());
    }

    void record(PathSegment& seg, double t) {
        seg.times.push_back(t);
        seg.positions.insert(seg.positions.end(), x_.begin(), x_.end());
        if (++steps_ > config_.max_steps) {
            throw CapExceeded("flow exceeded max_steps=" + std::to_string(config_.max_steps));
        }
    }

    double startup_length(double remaining) const {
        double h = config_.startup_dt;
        if (!(h > 0.0)) h = config_.tolerance > 0.0 && beta_.is_infinite() ? 1e-6 * config_.dt_max : config_.dt_max;
        return std::min(h, remaining);
    }

    void integrate_segment(PathSegment& seg) {
        record(seg, seg.t_begin);
        double t = seg.t_begin;
        const double alpha = seg.alpha;
        const auto runs = coincident_runs(x_);
        if (!runs.empty()) {
            double h = startup_length(seg.t_end - t);
            const std::vector<double> saved = x_;
            startup(runs, alpha, h);
            // Noisy neighbors can cross the new pair; shorten the startup and redraw.
            while (!strictly_increasing(x_) && h > config_.min_step) {
                x_ = saved;
                h *= 0.5;
                startup(runs, alpha, h);
            }
            t = (h == seg.t_end - t) ? seg.t_end : t + h;
            record(seg, t);
            h_try_ = 2.0 * h;
        } else if (!(h_try_ > 0.0)) {
            h_try_ = config_.dt_max;
        }
        if (!strictly_increasing(x_) && t < seg.t_end) {
            throw NumericalFailure("startup step produced unordered particles at t=" + std::to_string(t));
        }
        if (beta_.is_infinite()) {
            integrate_deterministic(seg, t, alpha);
        } else {
            integrate_stochastic(seg, t, alpha);
        }
    }

    // Analytic startup from coincident clusters. Cluster of size m: positions
    // c + s * lambda with lambda the Hermite zeros (beta = inf) or eigenvalues of
    // the Dumitriu-Edelman beta-Hermite matrix, s = sqrt(2 alpha h / beta); this
    // is the exact law of the isolated cluster at time h. Interactions with
    // particles outside the cluster are frozen for the step.
    void startup(const std::vector<std::pair<std::size_t, std::size_t>>& runs, double alpha, double h) {
        const std::size_t n = x_.size();
        std::vector<int> cluster_of(n, -1);
        for (std::size_t r = 0; r < runs.size(); ++r) {
            for (std::size_t j = runs[r].first; j < runs[r].second; ++j) cluster_of[j] = static_cast<int>(r);
        }
        std::vector<double> drift(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                if (i == j) continue;
                if (cluster_of[j] >= 0 && cluster_of[i] == cluster_of[j]) continue;
                drift[j] += alpha / (x_[j] - x_[i]);
            }
        }
        std::vector<double> next(n);
        const double sigma = beta_.noise_scale(alpha);
        for (std::size_t j = 0; j < n; ++j) {
            if (cluster_of[j] >= 0) continue;
            next[j] = x_[j] + h * drift[j];
            if (sigma > 0.0) next[j] += sigma * std::sqrt(h) * streams_[j]();
        }
        for (const auto& [b, e] : runs) {
            const std::size_t m = e - b;
            std::vector<double> offsets;
            if (beta_.is_infinite()) {
                const std::vector<double> z = hermite_zeros(m);
                const double s = std::sqrt(2.0 * alpha * h);
                for (double zi : z) offsets.push_back(s * zi);
            } else {
                offsets = beta_hermite_sample(m, alpha, h, streams_[b]);
            }
            for (std::size_t j = b; j < e; ++j) next[j] = x_[j] + offsets[j - b] + h * drift[j];
        }
        x_ = std::move(next);
    }

    std::vector<double> beta_hermite_sample(std::size_t m, double alpha, double h, GaussianStream& stream) {
        const double beta = beta_.value();
        Eigen::VectorXd diag(static_cast<Eigen::Index>(m));
        Eigen::VectorXd sub(static_cast<Eigen::Index>(m > 0 ? m - 1 : 0));
        for (std::size_t i = 0; i < m; ++i) diag[static_cast<Eigen::Index>(i)] = stream();  // N(0,2)/sqrt2
        for (std::size_t i = 1; i < m; ++i) {
            const double dof = beta * static_cast<double>(m - i);
            std::gamma_distribution<double> gamma(0.5 * dof, 2.0);
            sub[static_cast<Eigen::Index>(i - 1)] = std::sqrt(gamma(stream.engine)) / std::sqrt(2.0);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
        const double s = std::sqrt(2.0 * alpha * h / beta);
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) out[i] = s * solver.eigenvalues()[static_cast<Eigen::Index>(i)];
        return out;
    }

    bool rk4(std::span<const double> x, double alpha, double h, std::vector<double>& out) {
        const std::size_t n = x.size();
        k1_.resize(n);
        k2_.resize(n);
        k3_.resize(n);
        k4_.resize(n);
        tmp_.resize(n);
        out.resize(n);
        coulomb_drift(x, alpha, k1_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = x[j] + 0.5 * h * k1_[j];
        if (!strictly_increasing(tmp_)) return false;
        coulomb_drift(tmp_, alpha, k2_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = x[j] + 0.5 * h * k2_[j];
        if (!strictly_increasing(tmp_)) return false;
        coulomb_drift(tmp_, alpha, k3_);
        for (std::size_t j = 0; j < n; ++j) tmp_[j] = x[j] + h * k3_[j];
        if (!strictly_increasing(tmp_)) return false;
        coulomb_drift(tmp_, alpha, k4_);
        for (std::size_t j = 0; j < n; ++j) out[j] = x[j] + h / 6.0 * (k1_[j] + 2.0 * k2_[j] + 2.0 * k3_[j] + k4_[j]);
        return strictly_increasing(out);
    }

    void integrate_deterministic(PathSegment& seg, double t, double alpha) {
        const bool adaptive = config_.tolerance > 0.0;
        std::vector<double> y1;
        std::vector<double> yh;
        std::vector<double> y2;
        double h = adaptive ? std::min(h_try_, config_.dt_max) : config_.dt_max;
        while (t < seg.t_end) {
            const double remaining = seg.t_end - t;
            const bool last = h >= remaining;
            const double step = last ? remaining : h;
            if (step < config_.min_step && !last) underflow(t, step, seg);
            if (!adaptive) {
                if (!rk4(x_, alpha, step, y2)) {
                    if (step * 0.5 < config_.min_step) underflow(t, step, seg);
                    h = step * 0.5;
                    continue;
                }
                x_.swap(y2);
                t = last ? seg.t_end : t + step;
                record(seg, t);
                h = config_.dt_max;
                continue;
            }
            bool ok = rk4(x_, alpha, step, y1) && rk4(x_, alpha, 0.5 * step, yh) && rk4(yh, alpha, 0.5 * step, y2);
            if (!ok) {
                if (step * 0.5 < config_.min_step) underflow(t, step, seg);
                h = step * 0.5;
                continue;
            }
            double err = 0.0;
            double scale = 0.0;
            for (std::size_t j = 0; j < y2.size(); ++j) {
                err = std::max(err, std::abs(y2[j] - y1[j]) / 15.0);
                scale = std::max(scale, std::abs(y2[j]));
            }
            // Rounding floor: differences below a few ulps of the positions are noise.
            const double target = config_.tolerance * step + 16.0 * std::numeric_limits<double>::epsilon() * scale;
            const double factor = err > 0.0 ? 0.9 * std::pow(target / err, 0.25) : 2.0;
            if (err > target) {
                if (step * 0.5 < config_.min_step) underflow(t, step, seg);
                h = step * std::clamp(factor, 0.2, 0.5);
                continue;
            }
            x_.swap(y2);
            t = last ? seg.t_end : t + step;
            record(seg, t);
            h = std::min(config_.dt_max, step * std::clamp(factor, 0.2, 2.0));
        }
        h_try_ = h;
    }

    // One Euler-Maruyama step over [t, t+h] with Brownian increments dW. On an
    // ordering violation the increment is split at its midpoint by Brownian-bridge
    // sampling and both halves are retried.
    void em_step(PathSegment& seg, double t, double h, std::vector<double> dw, double alpha, double sigma, int depth) {
        const std::size_t n = x_.size();
        std::vector<double> drift(n);
        coulomb_drift(x_, alpha, drift);
        std::vector<double> next(n);
        for (std::size_t j = 0; j < n; ++j) next[j] = x_[j] + h * drift[j] + sigma * dw[j];
        const bool last = (t + h >= seg.t_end);
        if (strictly_increasing(next)) {
            x_.swap(next);
            record(seg, last ? seg.t_end : t + h);
            return;
        }
        if (0.5 * h < config_.min_step || depth > 60) underflow(t, h, seg);
        std::vector<double> first(n);
        std::vector<double> second(n);
        const double sd = 0.5 * std::sqrt(h);
        for (std::size_t j = 0; j < n; ++j) {
            first[j] = 0.5 * dw[j] + sd * streams_[j]();
            second[j] = dw[j] - first[j];
        }
        const double mid = t + 0.5 * h;
        em_step(seg, t, 0.5 * h, std::move(first), alpha, sigma, depth + 1);
        em_step(seg, mid, last ? seg.t_end - mid : 0.5 * h, std::move(second), alpha, sigma, depth + 1);
    }

    void integrate_stochastic(PathSegment& seg, double t, double alpha) {
        const double sigma = beta_.noise_scale(alpha);
        const std::size_t n = x_.size();
        while (t < seg.t_end) {
            const double remaining = seg.t_end - t;
            const bool last = config_.dt_max >= remaining;
            const double h = last ? remaining : config_.dt_max;
            std::vector<double> dw(n);
            const double sq = std::sqrt(h);
            for (std::size_t j = 0; j < n; ++j) dw[j] = sq * streams_[j]();
            em_step(seg, t, h, std::move(dw), alpha, sigma, 0);
            t = last ? seg.t_end : t + h;
        }
    }

    const MarkedForest& forest_;
    const AlphaSchedule& alpha_;
    FlowConfig config_;
    Beta beta_;
    std::uint64_t seed_;
    std::vector<VertexId> alive_;
    std::vector<double> x_;
    std::vector<GaussianStream> streams_;
    double h_try_ = 0.0;
    std::size_t steps_ = 0;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace

DrivingPath coulomb_flow(const MarkedForest& forest, const AlphaSchedule& alpha, std::span<const double> x0,
                         const FlowConfig& config) {
    return FlowRunner(forest, alpha, x0, config, Beta::infinite(), 0).run();
}

DrivingPath dyson_flow(const MarkedForest& forest, const AlphaSchedule& alpha, Beta beta,
                       std::span<const double> x0, const FlowConfig& config, std::uint64_t seed) {
    if (!beta.is_infinite() && beta.value() < 1.0) {
        throw InvalidArgument("dyson_flow requires beta >= 1 for well-posedness (got " +
                              std::to_string(beta.value()) + ")");
    }
    if (beta.is_infinite()) {
        DrivingPath p = coulomb_flow(forest, alpha, x0, config);
        p.seed = seed;
        return p;
    }
    return FlowRunner(forest, alpha, x0, config, beta, seed).run();
}

}  // namespace bloewner
