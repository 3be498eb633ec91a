#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "bloewner/genealogy.hpp"

namespace bloewner {

/// Inverse temperature of the particle system. Infinity is a distinct value
/// selecting the deterministic Coulomb flow, not a large float.
class Beta {
  public:
    static Beta infinite() { return Beta(); }
    explicit Beta(double value);

    bool is_infinite() const { return infinite_; }
    double value() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }
    /// Per-particle diffusion coefficient sqrt(2 alpha / beta).
    double noise_scale(double alpha) const;

    friend bool operator==(const Beta&, const Beta&) = default;

  private:
    Beta() : value_(0.0), infinite_(true) {}
    double value_;
    bool infinite_;
};

/// Right-continuous, piecewise-constant, positive repulsion strength.
/// values[0] applies before breakpoints[0], values[i] on [breakpoints[i-1], breakpoints[i]).
class AlphaSchedule {
  public:
    static AlphaSchedule constant(double value);
    AlphaSchedule(std::vector<double> breakpoints, std::vector<double> values);

    double at(double t) const;
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

  private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

struct Atom {
    double position;
    double mass;
};

struct AtomicMeasure {
    std::vector<Atom> atoms;

    std::size_t size() const { return atoms.size(); }
    bool empty() const { return atoms.empty(); }
    double total_mass() const;
};

enum class EventKind { branch, death };

struct PathEvent {
    double time;
    EventKind kind;
    VertexId vertex;
    double position;  // parent's terminal position
};

/// Particle trajectories between two consecutive event times. Rows are grid
/// times; columns follow `alive`, which is both plane and spatial order.
struct PathSegment {
    double t_begin = 0.0;
    double t_end = 0.0;
    double alpha = 0.0;
    std::vector<VertexId> alive;
    std::vector<double> times;
    std::vector<double> positions;

    std::size_t width() const { return alive.size(); }
    std::size_t rows() const { return times.size(); }
    std::span<const double> row(std::size_t k) const {
        return {positions.data() + k * width(), width()};
    }
    /// Linear interpolation between grid rows; t is clamped to the segment.
    void interpolate(double t, std::span<double> out) const;
};

struct DrivingPath {
    std::vector<PathSegment> segments;
    std::vector<PathEvent> events;
    Beta beta = Beta::infinite();
    AlphaSchedule alpha = AlphaSchedule::constant(1.0);
    double mass_per_atom = 1.0;
    std::uint64_t seed = 0;
    double dt_max = 0.0;
    double end_time = 0.0;  // last simulated time
    bool extinct = true;    // true when end_time is the extinction time

    /// Segment with t_begin <= t < t_end; the last segment also owns its t_end.
    const PathSegment* segment_at(double t) const;
    AtomicMeasure measure_at(double t) const;
    /// Exact integral of mass_per_atom * |alive| over [0, t].
    double integrated_mass(double t) const;
    /// Largest number of atoms alive at once.
    std::size_t max_alive() const;
};

struct FlowConfig {
    double dt_max = 1e-3;
    /// Coulomb case: local error target per unit time for step doubling.
    /// Zero or negative selects fixed steps of dt_max (halving only for ordering repair).
    double tolerance = 1e-8;
    /// Length of the analytic startup step from coincident particles; zero picks
    /// 1e-6 * dt_max in adaptive mode and dt_max in fixed mode.
    double startup_dt = 0.0;
    double min_step = 1e-14;
    double mass_per_atom = 1.0;
    /// Stop at this time even if the genealogy is still alive; infinity = extinction.
    double horizon = std::numeric_limits<double>::infinity();
    /// Extra times that must appear on the grid (segment splits without events).
    std::vector<double> output_times;
    std::size_t max_steps = 50'000'000;
};

/// (-sqrt(alpha t), +sqrt(alpha t)).
std::pair<double, double> two_particle_exact(double alpha, double t);

DrivingPath coulomb_flow(const MarkedForest& forest, const AlphaSchedule& alpha,
                         std::span<const double> x0, const FlowConfig& config);

/// Euler-Maruyama with per-vertex Brownian streams. Beta::infinite() returns
/// exactly coulomb_flow(forest, alpha, x0, config).
DrivingPath dyson_flow(const MarkedForest& forest, const AlphaSchedule& alpha, Beta beta,
                       std::span<const double> x0, const FlowConfig& config, std::uint64_t seed);

/// Deterministic square-root predictor for the coincident pair (k, k+1): the
/// pair moves to -/+ sqrt(alpha dt) plus dt times the drift of the others
/// frozen at their current positions; all other particles take an Euler step.
std::vector<double> branch_startup_step(std::span<const double> positions, std::size_t k, double alpha,
                                        double dt);

/// Zeros of the physicists' Hermite polynomial H_m, ascending.
std::vector<double> hermite_zeros(std::size_t m);

/// Coulomb drift alpha * sum_{k != j} 1/(x_j - x_k) written into `out`.
void coulomb_drift(std::span<const double> x, double alpha, std::span<double> out);

/// Piecewise-constant schedule alpha_t = pi/theta_{nu(t)} - 2 with nu(t) the most
/// recent death. Before the first death the first-dying vertex's value is used.
AlphaSchedule angle_schedule(const MarkedForest& forest, std::span<const double> angles);

/// Driving path given by explicit trajectories for a fixed set of atoms without
/// branching, sampled on `times`. Used for wedge drivers and scaling checks.
DrivingPath explicit_path(std::vector<double> times, std::size_t width,
                          const std::vector<std::vector<double>>& trajectories, double mass_per_atom = 1.0);

}  // namespace bloewner
