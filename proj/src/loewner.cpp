#include "bloewner/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "bloewner/errors.hpp"

namespace bloewner {

double SolverConfig::tip_height() const { return eps > 0.0 ? eps : std::sqrt(dt) / 10.0; }

namespace {

// Driver values inside one segment, with a cursor for monotone access.
class SegmentCursor {
  public:
    explicit SegmentCursor(const PathSegment& seg) : seg_(seg), values_(seg.width()) {}

    std::span<const double> at(double tau) {
        const auto& ts = seg_.times;
        const std::size_t w = seg_.width();
        if (tau <= ts.front()) return seg_.row(0);
        if (tau >= ts.back()) return seg_.row(ts.size() - 1);
        while (k_ + 1 < ts.size() && ts[k_ + 1] < tau) ++k_;
        while (k_ > 0 && ts[k_] > tau) --k_;
        const double lam = (tau - ts[k_]) / (ts[k_ + 1] - ts[k_]);
        const double* a = seg_.positions.data() + k_ * w;
        const double* b = a + w;
        for (std::size_t j = 0; j < w; ++j) values_[j] = a[j] + lam * (b[j] - a[j]);
        return values_;
    }

  private:
    const PathSegment& seg_;
    std::vector<double> values_;
    std::size_t k_ = 0;
};

struct FlowState {
    Complex y;
    double h;  // carried step size
};

enum class Outcome { done, swallowed };

// Integrates dy/dsigma = sign * sum m/(base + y - U(tau)), tau = tau0 + dir*sigma,
// over one segment with Dormand-Prince 5(4).
Outcome integrate_segment(const PathSegment& seg, double mass, double tau0, double tau1, Complex base, double sign,
                          double rtol, double atol, double min_step, double swallow_tol, FlowState& st,
                          double& stop_tau) {
    const double dir = tau1 >= tau0 ? 1.0 : -1.0;
    const double length = std::abs(tau1 - tau0);
    if (length == 0.0 || seg.width() == 0) return Outcome::done;
    SegmentCursor cur(seg);
    const auto field = [&](double sigma, Complex y) {
        const auto u = cur.at(tau0 + dir * sigma);
        const Complex z = base + y;
        Complex acc = 0.0;
        for (double uj : u) acc += 1.0 / (z - uj);
        return sign * mass * acc;
    };

    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    double sigma = 0.0;
    double h = std::min(st.h > 0.0 ? st.h : length, length);
    Complex k1 = field(0.0, st.y);
    while (sigma < length) {
        const bool last = sigma + h >= length;
        const double step = last ? length - sigma : h;
        const Complex y = st.y;
        const Complex k2 = field(sigma + step / 5, y + step * a21 * k1);
        const Complex k3 = field(sigma + step * 3 / 10, y + step * (a31 * k1 + a32 * k2));
        const Complex k4 = field(sigma + step * 4 / 5, y + step * (a41 * k1 + a42 * k2 + a43 * k3));
        const Complex k5 = field(sigma + step * 8 / 9, y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Complex k6 =
            field(sigma + step, y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Complex y5 = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Complex k7 = field(sigma + step, y5);
        const Complex err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double scale = atol + rtol * std::max(std::abs(base + y), std::abs(base + y5));
        const double ratio = std::abs(err) / scale;
        const bool finite = std::isfinite(y5.real()) && std::isfinite(y5.imag()) && std::isfinite(ratio);
        if (!finite || ratio > 1.0) {
            const double shrink = finite ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.5) : 0.25;
            h = step * shrink;
            if (h < min_step) {
                stop_tau = tau0 + dir * sigma;
                st.h = h;
                return Outcome::swallowed;
            }
            continue;
        }
        st.y = y5;
        sigma = last ? length : sigma + step;
        k1 = k7;
        const double grow = ratio > 0.0 ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0) : 5.0;
        if (!last || step >= h) h = step * grow;
        if (swallow_tol > 0.0) {
            const auto u = cur.at(tau0 + dir * sigma);
            const Complex z = base + st.y;
            double dmin = std::numeric_limits<double>::infinity();
            for (double uj : u) dmin = std::min(dmin, std::abs(z - uj));
            if (dmin < swallow_tol || z.imag() <= 0.0) {
                stop_tau = tau0 + dir * sigma;
                st.h = h;
                return Outcome::swallowed;
            }
        }
    }
    st.h = h;
    return Outcome::done;
}

std::size_t segment_index_left(const DrivingPath& path, double t) {
    // Segment with t_begin < t <= t_end (left limit); t > 0.
    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        if (path.segments[i].t_begin < t && t <= path.segments[i].t_end) return i;
    }
    throw InvalidArgument("time " + std::to_string(t) + " is outside the driving path");
}

void check_time(const DrivingPath& path, double t) {
    if (std::isnan(t) || t < 0.0) throw InvalidArgument("Loewner time must be nonnegative");
    if (t > path.end_time * (1.0 + 1e-15) + 1e-300) {
        throw InvalidArgument("Loewner time " + std::to_string(t) + " exceeds the path end " +
                              std::to_string(path.end_time));
    }
}

// Forward integration of y with z = base + y from 0 to t.
ForwardResult forward_generic(const DrivingPath& path, double t, Complex base, Complex y0, double rtol,
                              double atol, double min_step, double swallow_tol) {
    check_time(path, t);
    FlowState st{y0, 0.0};
    for (const auto& seg : path.segments) {
        if (seg.t_begin >= t) break;
        const double hi = std::min(seg.t_end, t);
        double stop = 0.0;
        if (integrate_segment(seg, path.mass_per_atom, seg.t_begin, hi, base, 1.0, rtol, atol, min_step,
                              swallow_tol, st, stop) == Outcome::swallowed) {
            return {base + st.y, stop};
        }
    }
    return {base + st.y, std::nullopt};
}

}  // namespace

ForwardResult forward_map(const DrivingPath& path, double t, Complex z, const SolverConfig& cfg) {
    if (!(z.imag() > 0.0)) throw InvalidArgument("forward_map needs Im z > 0");
    return forward_generic(path, t, 0.0, z, cfg.rtol, cfg.atol, cfg.min_step, cfg.swallow_tol);
}

Complex reverse_map(const DrivingPath& path, double t, Complex w, const SolverConfig& cfg) {
    if (!(w.imag() > 0.0)) throw InvalidArgument("reverse_map needs Im w > 0");
    check_time(path, t);
    if (t == 0.0 || path.segments.empty()) return w;
    FlowState st{w, 0.0};
    const double t_eff = std::min(t, path.segments.back().t_end);
    std::size_t i = segment_index_left(path, t_eff);
    double top = t_eff;
    for (;;) {
        const PathSegment& seg = path.segments[i];
        double stop = 0.0;
        if (integrate_segment(seg, path.mass_per_atom, top, seg.t_begin, 0.0, -1.0, cfg.rtol, cfg.atol,
                              cfg.min_step, 0.0, st, stop) == Outcome::swallowed) {
            std::ostringstream os;
            os.precision(17);
            os << "reverse_map: step underflow at driver time " << stop << " (w=" << w << ", t=" << t
               << ", current h=" << st.y << ")";
            throw NumericalFailure(os.str());
        }
        if (i == 0) break;
        --i;
        top = path.segments[i].t_end;
    }
    return st.y;
}

double hcap(const DrivingPath& path, double t, const SolverConfig& cfg) {
    check_time(path, t);
    if (t == 0.0) return 0.0;
    double umax = 0.0;
    for (const auto& seg : path.segments) {
        if (seg.t_begin >= t) break;
        for (double p : seg.positions) umax = std::max(umax, std::abs(p));
    }
    const double bound = path.integrated_mass(t);
    const double r0 = 1e3 * std::max({1.0, umax, std::sqrt(bound)});
    const auto b_at = [&](double r) {
        const Complex z(0.0, r);
        const ForwardResult res = forward_generic(path, t, z, 0.0, 1e-13, 1e-22 * r, cfg.min_step, 0.0);
        if (res.swallowed_at) throw NumericalFailure("hcap: probe point was swallowed");
        // z (g - z) = b + c1/z + c2/z^2 + ...; real coefficients, so Re kills c1/z.
        return (z * (res.value - z)).real();
    };
    const double b1 = b_at(r0);
    const double b2 = b_at(2.0 * r0);
    if (std::abs(b1 - b2) > 1e-2 * (1.0 + std::abs(b2))) {
        throw NumericalFailure("hcap: large-|z| fit failed (values " + std::to_string(b1) + ", " +
                               std::to_string(b2) + ")");
    }
    return (4.0 * b2 - b1) / 3.0;
}

const HullCurve* TracedHull::curve(VertexId v) const {
    for (const auto& c : curves) {
        if (c.vertex == v) return &c;
    }
    return nullptr;
}

std::size_t TracedHull::point_count() const {
    std::size_t n = 0;
    for (const auto& c : curves) n += c.points.size();
    return n;
}

namespace {

struct VertexSpan {
    double birth = 0.0;
    double death = 0.0;
    std::optional<VertexId> parent;
    bool seen = false;
};

std::map<VertexId, VertexSpan> vertex_spans(const DrivingPath& path) {
    std::map<VertexId, VertexSpan> spans;
    for (const auto& seg : path.segments) {
        for (VertexId v : seg.alive) {
            auto& s = spans[v];
            if (!s.seen) {
                s.birth = seg.t_begin;
                s.seen = true;
            }
            s.death = seg.t_end;
        }
    }
    for (std::size_t i = 1; i < path.segments.size(); ++i) {
        const auto& prev = path.segments[i - 1].alive;
        const auto& next = path.segments[i].alive;
        const double t = path.segments[i].t_begin;
        for (const auto& ev : path.events) {
            if (ev.time != t || ev.kind != EventKind::branch) continue;
            for (VertexId v : next) {
                if (std::find(prev.begin(), prev.end(), v) == prev.end()) spans[v].parent = ev.vertex;
            }
        }
    }
    return spans;
}

double driver_left(const DrivingPath& path, VertexId v, double t) {
    const std::size_t i = segment_index_left(path, t);
    const PathSegment& seg = path.segments[i];
    const auto it = std::find(seg.alive.begin(), seg.alive.end(), v);
    if (it == seg.alive.end()) throw InvalidArgument("vertex not alive at requested time");
    std::vector<double> x(seg.width());
    seg.interpolate(t, x);
    return x[static_cast<std::size_t>(it - seg.alive.begin())];
}

std::vector<double> sample_times(double birth, double death, const SolverConfig& cfg) {
    const double life = death - birth;
    const std::size_t n_geo = std::max<std::size_t>(2, cfg.max_points / 2);
    const std::size_t n_uni = std::max<std::size_t>(2, cfg.max_points - n_geo);
    std::vector<double> ts;
    const double d0 = std::min(cfg.dt, life);
    for (std::size_t i = 0; i < n_geo; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n_geo - 1);
        ts.push_back(birth + d0 * std::pow(life / d0, frac));
    }
    for (std::size_t i = 1; i <= n_uni; ++i) {
        ts.push_back(birth + life * static_cast<double>(i) / static_cast<double>(n_uni));
    }
    ts.push_back(death);
    std::sort(ts.begin(), ts.end());
    std::vector<double> out;
    for (double t : ts) {
        if (!(t > birth) || t > death) continue;
        if (!out.empty() && t - out.back() <= 1e-12 * (1.0 + std::abs(t))) {
            out.back() = std::max(out.back(), t);
            continue;
        }
        out.push_back(t);
    }
    if (out.empty() || out.back() != death) out.push_back(death);
    return out;
}

}  // namespace

TracedHull trace_hull(const DrivingPath& path, const SolverConfig& cfg) {
    if (path.segments.empty()) throw InvalidArgument("trace_hull: empty driving path");
    TracedHull hull;
    hull.eps = cfg.tip_height();
    const auto spans = vertex_spans(path);
    const PathSegment& first = path.segments.front();

    std::map<VertexId, Complex> last_tip;
    for (const auto& [v, span] : spans) {
        HullCurve curve;
        curve.vertex = v;
        curve.parent = span.parent;
        curve.birth = span.birth;
        curve.death = span.death;
        curve.times.push_back(span.birth);
        curve.points.push_back(Complex(0.0, 0.0));  // filled below
        for (double t : sample_times(span.birth, span.death, cfg)) {
            const double u = driver_left(path, v, t);
            curve.times.push_back(t);
            curve.points.push_back(reverse_map(path, t, Complex(u, hull.eps), cfg));
        }
        last_tip[v] = curve.points.back();
        hull.curves.push_back(std::move(curve));
    }
    std::set<double> bases;
    for (auto& curve : hull.curves) {
        if (curve.parent) {
            curve.points.front() = last_tip.at(*curve.parent);
        } else {
            const auto it = std::find(first.alive.begin(), first.alive.end(), curve.vertex);
            const double x0 = first.row(0)[static_cast<std::size_t>(it - first.alive.begin())];
            curve.points.front() = Complex(x0, 0.0);
            bases.insert(x0);
        }
    }
    hull.base_points.assign(bases.begin(), bases.end());
    for (const auto& ev : path.events) {
        if (ev.kind == EventKind::branch) hull.branch_images.push_back({ev.vertex, ev.time, last_tip.at(ev.vertex)});
    }
    for (std::size_t k = 1; k <= cfg.capacity_samples; ++k) {
        const double t = path.end_time * static_cast<double>(k) / static_cast<double>(cfg.capacity_samples);
        hull.capacity_trace.emplace_back(t, hcap(path, t, cfg));
    }
    // Resolution warnings: tips of distinct curves closer than eps.
    for (std::size_t i = 0; i < hull.curves.size(); ++i) {
        for (std::size_t j = i + 1; j < hull.curves.size(); ++j) {
            const auto& a = hull.curves[i];
            const auto& b = hull.curves[j];
            for (std::size_t p = 1; p < a.points.size(); ++p) {
                for (std::size_t q = 1; q < b.points.size(); ++q) {
                    if (a.times[p] == b.times[q] && std::abs(a.points[p] - b.points[q]) < hull.eps) {
                        std::ostringstream os;
                        os << "curves " << a.vertex << " and " << b.vertex << " come within eps at t=" << a.times[p];
                        hull.warnings.push_back(os.str());
                        p = a.points.size();
                        break;
                    }
                }
            }
        }
    }
    return hull;
}

double fit_ray_angle(Complex origin, const std::vector<Complex>& points) {
    if (points.size() < 2) throw InvalidArgument("fit_ray_angle: need at least two points in the fit window");
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    Complex mean = 0.0;
    for (const Complex& p : points) {
        const Complex d = p - origin;
        sxx += d.real() * d.real();
        sxy += d.real() * d.imag();
        syy += d.imag() * d.imag();
        mean += d;
    }
    // Principal axis of the 2x2 scatter matrix.
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    Complex u = std::polar(1.0, theta);
    if ((std::conj(u) * mean).real() < 0.0) u = -u;
    return std::arg(u);
}

namespace {

std::vector<Complex> window(const std::vector<Complex>& pts, Complex origin, double r_min, double fraction) {
    double extent = 0.0;
    for (const Complex& p : pts) extent = std::max(extent, std::abs(p - origin));
    const double r_max = fraction * extent;
    std::vector<Complex> out;
    for (const Complex& p : pts) {
        const double r = std::abs(p - origin);
        if (r >= r_min && r <= r_max) out.push_back(p);
    }
    return out;
}

// Tangent direction at `origin`: chord angles of the window points regressed
// linearly on their distance and evaluated at distance zero.
double tangent_angle(Complex origin, const std::vector<Complex>& pts, bool extrapolate) {
    const double axis = fit_ray_angle(origin, pts);
    if (!extrapolate || pts.size() < 3) return axis;
    const Complex rot = std::polar(1.0, -axis);
    double n = 0.0, sr = 0.0, sa = 0.0, srr = 0.0, sra = 0.0;
    for (const Complex& p : pts) {
        const Complex d = p - origin;
        const double r = std::abs(d);
        const double a = std::arg(d * rot);
        n += 1.0;
        sr += r;
        sa += a;
        srr += r * r;
        sra += r * a;
    }
    const double det = n * srr - sr * sr;
    if (!(det > 1e-12 * n * srr)) return axis;
    const double intercept = (srr * sa - sr * sra) / det;
    return std::remainder(axis + intercept, 2.0 * std::numbers::pi);
}

}  // namespace

BaseAngles base_angles(const TracedHull& hull, double base_point, const AngleFit& fit) {
    const double r_min = fit.r_min > 0.0 ? fit.r_min : 2.0 * hull.eps;
    BaseAngles out;
    const Complex origin(base_point, 0.0);
    for (const auto& c : hull.curves) {
        if (c.parent || c.points.empty()) continue;
        if (std::abs(c.points.front() - origin) > 1e-9 * (1.0 + std::abs(base_point))) continue;
        const std::vector<Complex> pts(c.points.begin() + 1, c.points.end());
        const auto w = window(pts, origin, r_min, fit.fit_fraction);
        if (w.size() < 2) {
            throw InvalidArgument("base_angles: insufficient points in the fit window for vertex " +
                                  std::to_string(c.vertex));
        }
        double a = tangent_angle(origin, w, fit.extrapolate);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        out.angles.push_back(a);
    }
    if (out.angles.empty()) throw InvalidArgument("base_angles: no curve starts at the requested base point");
    std::sort(out.angles.begin(), out.angles.end());
    double prev = 0.0;
    for (double a : out.angles) {
        out.gaps.push_back(a - prev);
        prev = a;
    }
    out.gaps.push_back(std::numbers::pi - prev);
    return out;
}

std::vector<double> branch_vertex_angles(const TracedHull& hull, VertexId vertex, const AngleFit& fit) {
    const HullCurve* parent = hull.curve(vertex);
    if (parent == nullptr) throw InvalidArgument("branch_vertex_angles: unknown vertex");
    const BranchImage* img = nullptr;
    for (const auto& b : hull.branch_images) {
        if (b.vertex == vertex) img = &b;
    }
    if (img == nullptr) throw InvalidArgument("branch_vertex_angles: vertex has no recorded branch image");
    std::vector<const HullCurve*> kids;
    for (const auto& c : hull.curves) {
        if (c.parent && *c.parent == vertex) kids.push_back(&c);
    }
    if (kids.size() != 2) throw InvalidArgument("branch_vertex_angles: branch vertex needs two child curves");

    const double r_min = fit.r_min > 0.0 ? fit.r_min : 2.0 * hull.eps;
    const Complex origin = img->point;
    const auto direction = [&](const std::vector<Complex>& pts) {
        const auto w = window(pts, origin, r_min, fit.fit_fraction);
        if (w.size() < 2) {
            throw InvalidArgument("branch_vertex_angles: insufficient resolution near vertex " +
                                  std::to_string(vertex));
        }
        return tangent_angle(origin, w, fit.extrapolate);
    };
    const std::vector<Complex> back(parent->points.begin(), parent->points.end() - 1);
    const double d_parent = direction(back);
    std::vector<double> dirs;
    for (const HullCurve* k : kids) dirs.push_back(direction({k->points.begin() + 1, k->points.end()}));
    const auto rel = [&](double a) {
        double r = std::fmod(a - d_parent, 2.0 * std::numbers::pi);
        if (r < 0.0) r += 2.0 * std::numbers::pi;
        return r;
    };
    std::vector<double> r{rel(dirs[0]), rel(dirs[1])};
    std::sort(r.begin(), r.end());
    const double g1 = r[0];
    const double g2 = r[1] - r[0];
    return {g1, g2, 2.0 * std::numbers::pi - g1 - g2};
}

namespace {

double cross(Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); }

bool segments_intersect(Complex p1, Complex p2, Complex q1, Complex q2) {
    const double d1 = cross(q2 - q1, p1 - q1);
    const double d2 = cross(q2 - q1, p2 - q1);
    const double d3 = cross(p2 - p1, q1 - p1);
    const double d4 = cross(p2 - p1, q2 - p1);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    const auto on_seg = [](Complex a, Complex b, Complex p) {
        return std::min(a.real(), b.real()) <= p.real() && p.real() <= std::max(a.real(), b.real()) &&
               std::min(a.imag(), b.imag()) <= p.imag() && p.imag() <= std::max(a.imag(), b.imag());
    };
    if (d1 == 0 && on_seg(q1, q2, p1)) return true;
    if (d2 == 0 && on_seg(q1, q2, p2)) return true;
    if (d3 == 0 && on_seg(p1, p2, q1)) return true;
    if (d4 == 0 && on_seg(p1, p2, q2)) return true;
    return false;
}

double point_segment(Complex p, Complex a, Complex b) {
    const Complex ab = b - a;
    const double len2 = std::norm(ab);
    double s = len2 > 0.0 ? ((std::conj(ab) * (p - a)).real() / len2) : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return std::abs(p - (a + s * ab));
}

double segment_distance(Complex p1, Complex p2, Complex q1, Complex q2) {
    if (segments_intersect(p1, p2, q1, q2)) return 0.0;
    return std::min({point_segment(p1, q1, q2), point_segment(p2, q1, q2), point_segment(q1, p1, p2),
                     point_segment(q2, p1, p2)});
}

}  // namespace

EmbeddingReport verify_embedding(const TracedHull& hull, const EmbeddingOptions& options) {
    EmbeddingReport rep;
    const double excl = options.exclusion_radius > 0.0 ? options.exclusion_radius : 4.0 * hull.eps;
    const double floor = options.separation_floor > 0.0 ? options.separation_floor : 0.1 * hull.eps;
    rep.min_separation = std::numeric_limits<double>::infinity();
    const auto fail = [&](const std::string& msg) {
        rep.pass = false;
        rep.failures.push_back(msg);
    };

    for (const auto& c : hull.curves) {
        std::ostringstream tag;
        tag << "curve " << c.vertex;
        if (c.points.size() < 2) {
            fail(tag.str() + ": fewer than two points");
            continue;
        }
        if (c.parent) {
            const HullCurve* p = hull.curve(*c.parent);
            if (p == nullptr) {
                fail(tag.str() + ": parent curve missing");
            } else if (std::abs(c.points.front() - p->points.back()) > options.adjacency_tol) {
                fail(tag.str() + ": does not start at the parent's branch image");
            }
        } else if (std::abs(c.points.front().imag()) > options.adjacency_tol) {
            fail(tag.str() + ": root curve does not start on the real axis");
        }
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            if (!(c.points[i].imag() > 0.0)) {
                std::ostringstream os;
                os << tag.str() << ": point " << i << " not in the upper half-plane " << c.points[i];
                fail(os.str());
                break;
            }
        }
        // Simplicity: non-adjacent segments must not meet.
        bool simple = true;
        for (std::size_t i = 0; i + 1 < c.points.size() && simple; ++i) {
            for (std::size_t j = i + 2; j + 1 < c.points.size(); ++j) {
                if (segments_intersect(c.points[i], c.points[i + 1], c.points[j], c.points[j + 1])) {
                    std::ostringstream os;
                    os << tag.str() << ": self-intersection between segments " << i << " and " << j << " near "
                       << c.points[i];
                    fail(os.str());
                    simple = false;
                    break;
                }
            }
        }
    }

    for (std::size_t a = 0; a < hull.curves.size(); ++a) {
        for (std::size_t b = a + 1; b < hull.curves.size(); ++b) {
            const auto& A = hull.curves[a];
            const auto& B = hull.curves[b];
            std::vector<Complex> shared;
            for (Complex pa : {A.points.front(), A.points.back()}) {
                for (Complex pb : {B.points.front(), B.points.back()}) {
                    if (std::abs(pa - pb) <= options.adjacency_tol) shared.push_back(pa);
                }
            }
            const auto near_shared = [&](Complex p) {
                for (Complex s : shared) {
                    if (std::abs(p - s) < excl) return true;
                }
                return false;
            };
            bool reported = false;
            for (std::size_t i = 0; i + 1 < A.points.size() && !reported; ++i) {
                if (near_shared(A.points[i]) || near_shared(A.points[i + 1])) continue;
                for (std::size_t j = 0; j + 1 < B.points.size(); ++j) {
                    if (near_shared(B.points[j]) || near_shared(B.points[j + 1])) continue;
                    const double d = segment_distance(A.points[i], A.points[i + 1], B.points[j], B.points[j + 1]);
                    rep.min_separation = std::min(rep.min_separation, d);
                    if (d <= floor) {
                        std::ostringstream os;
                        os << "curves " << A.vertex << " and " << B.vertex
                           << (d == 0.0 ? " intersect" : " come closer than the resolution floor") << " near "
                           << A.points[i];
                        fail(os.str());
                        reported = true;
                        break;
                    }
                }
            }
        }
    }
    return rep;
}

GrowthReport local_growth_check(const DrivingPath& path, const TracedHull& hull, double t) {
    GrowthReport rep;
    if (path.segments.empty()) return rep;
    const auto spans = vertex_spans(path);
    const PathSegment& first = path.segments.front();
    std::map<VertexId, double> origin;  // initial position of each lineage
    for (std::size_t j = 0; j < first.width(); ++j) origin[first.alive[j]] = first.row(0)[j];
    const auto root_of = [&](VertexId v) {
        while (spans.at(v).parent) v = *spans.at(v).parent;
        return v;
    };
    double sup = 0.0;
    std::size_t n = 0;
    for (const auto& seg : path.segments) {
        if (seg.t_begin > t) break;
        n = std::max(n, seg.width());
        for (std::size_t k = 0; k < seg.rows(); ++k) {
            if (seg.times[k] > t) break;
            for (std::size_t j = 0; j < seg.width(); ++j) {
                sup = std::max(sup, std::abs(seg.row(k)[j] - origin.at(root_of(seg.alive[j]))));
            }
        }
    }
    rep.c_t = std::max(sup, std::sqrt(static_cast<double>(n) * t));
    const double radius = 3.0 * rep.c_t;
    for (const auto& c : hull.curves) {
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            if (c.times[i] > t) break;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [v, x0] : origin) best = std::min(best, std::abs(c.points[i] - Complex(x0, 0.0)));
            ++rep.checked;
            if (radius > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, best / radius);
            if (best > radius) {
                rep.pass = false;
                std::ostringstream os;
                os << "point " << c.points[i] << " of curve " << c.vertex << " lies " << best
                   << " from every initial driver (bound " << radius << ")";
                rep.failures.push_back(os.str());
            }
        }
    }
    return rep;
}

}  // namespace bloewner
