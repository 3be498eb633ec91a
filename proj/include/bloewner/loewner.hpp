#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bloewner/driver.hpp"

namespace bloewner {

using Complex = std::complex<double>;

struct SolverConfig {
    /// Tip sampling step; also sets the default tip height.
    double dt = 1e-3;
    /// Height above the driver at which tips are pulled back; <= 0 means sqrt(dt)/10.
    double eps = 0.0;
    double swallow_tol = 1e-6;
    /// Curve points per vertex (geometric near the birth, uniform afterward).
    std::size_t max_points = 200;
    double rtol = 1e-10;
    double atol = 1e-13;
    double min_step = 1e-16;
    /// Number of (t, b_t) samples stored with a traced hull.
    std::size_t capacity_samples = 5;

    double tip_height() const;
};

struct ForwardResult {
    Complex value;                       // g_t(z) when not swallowed
    std::optional<double> swallowed_at;  // T_z when the trajectory hit a driver
};

ForwardResult forward_map(const DrivingPath& path, double t, Complex z, const SolverConfig& cfg);

/// h_t(w) = g_t^{-1}(w) by the reverse flow dh/ds = -sum m/(h - U(t-s)).
Complex reverse_map(const DrivingPath& path, double t, Complex w, const SolverConfig& cfg);

/// Half-plane capacity b_t from the large-|z| expansion of the forward map.
double hcap(const DrivingPath& path, double t, const SolverConfig& cfg);

struct HullCurve {
    VertexId vertex = 0;
    std::optional<VertexId> parent;
    double birth = 0.0;
    double death = 0.0;
    std::vector<double> times;   // times[0] = birth
    std::vector<Complex> points; // points[0] = start (axis point or branch image)
};

struct BranchImage {
    VertexId vertex;  // the branching parent
    double time;
    Complex point;
};

struct TracedHull {
    std::vector<HullCurve> curves;
    std::vector<double> base_points;  // distinct axis starting points, ascending
    std::vector<BranchImage> branch_images;
    std::vector<std::pair<double, double>> capacity_trace;  // (t, b_t)
    double eps = 0.0;
    std::vector<std::string> warnings;

    const HullCurve* curve(VertexId v) const;
    std::size_t point_count() const;
};

TracedHull trace_hull(const DrivingPath& path, const SolverConfig& cfg);

struct AngleFit {
    double r_min = 0.0;         // inner radius of the fit annulus; <= 0 means 2 * eps
    double fit_fraction = 0.1;  // outer radius as a fraction of the curve's extent
    /// Extrapolate chord angles linearly in the distance to distance zero;
    /// otherwise the principal axis of the window is returned.
    bool extrapolate = true;
};

/// Least-squares direction (radians) of a ray from `origin` through `points`.
double fit_ray_angle(Complex origin, const std::vector<Complex>& points);

struct BaseAngles {
    std::vector<double> angles;  // ascending, measured from the positive real axis
    std::vector<double> gaps;    // angles.size()+1 gaps including both axis sides; sums to pi
};

BaseAngles base_angles(const TracedHull& hull, double base_point, const AngleFit& fit = {});

/// Gaps between the three edges at the branch image of `vertex`, counterclockwise
/// starting from the parent edge. They sum to 2 pi exactly.
std::vector<double> branch_vertex_angles(const TracedHull& hull, VertexId vertex, const AngleFit& fit = {});

struct EmbeddingReport {
    bool pass = true;
    double min_separation = 0.0;  // smallest inter-curve distance outside shared-point balls
    std::vector<std::string> failures;
};

struct EmbeddingOptions {
    double exclusion_radius = 0.0;   // <= 0 means 4 * eps
    double separation_floor = 0.0;   // <= 0 means eps / 10
    double adjacency_tol = 1e-9;
};

EmbeddingReport verify_embedding(const TracedHull& hull, const EmbeddingOptions& options = {});

struct GrowthReport {
    bool pass = true;
    double c_t = 0.0;
    double worst_ratio = 0.0;  // max over hull points of dist / (3 C_t)
    std::size_t checked = 0;
    std::vector<std::string> failures;
};

GrowthReport local_growth_check(const DrivingPath& path, const TracedHull& hull, double t);

}  // namespace bloewner
