#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "bloewner/rng.hpp"

namespace bloewner {

using VertexId = std::uint32_t;

/// One individual of a marked plane forest. Times are absolute.
struct Vertex {
    std::optional<VertexId> parent;
    std::vector<VertexId> children;  // 0 or 2, plane order
    double birth = 0.0;
    double lifetime = 0.0;
    double death = 0.0;
    std::uint32_t tree = 0;       // index of the tree (initial individual) it descends from
    std::uint64_t path_hash = 0;  // hash of the Ulam-Harris label; structure only, seed-free
};

/// Finite rooted plane forest with birth/death marks.
///
/// Vertex ids are assigned in depth-first preorder, tree by tree, so ascending
/// id order is the lexicographic (plane) order used throughout the library.
class MarkedForest {
  public:
    MarkedForest() = default;

    /// Builds from raw vertices (any id order) and validates every invariant.
    /// Ids are renumbered into preorder; the returned permutation is not kept.
    static MarkedForest from_vertices(std::vector<Vertex> vertices);

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const Vertex& vertex(VertexId v) const { return vertices_.at(v); }
    std::size_t size() const { return vertices_.size(); }
    const std::vector<VertexId>& roots() const { return roots_; }
    std::size_t tree_count() const { return roots_.size(); }

    bool is_ancestor(VertexId ancestor, VertexId v) const;

    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;

  private:
    std::vector<Vertex> vertices_;
    std::vector<VertexId> roots_;
};

/// A forest with exactly one tree.
class MarkedPlaneTree {
  public:
    explicit MarkedPlaneTree(MarkedForest forest);

    const MarkedForest& forest() const { return forest_; }
    operator const MarkedForest&() const { return forest_; }  // NOLINT(google-explicit-constructor)

    VertexId root() const { return forest_.roots().front(); }
    std::size_t size() const { return forest_.size(); }
    const Vertex& vertex(VertexId v) const { return forest_.vertex(v); }

  private:
    MarkedForest forest_;
};

struct GwOptions {
    std::size_t vertex_cap = 1'000'000;
    int max_resamples = 16;
    /// Individuals dying after this time keep their marks but get no children.
    /// Per-vertex streams make the result the restriction of the full forest.
    double horizon = std::numeric_limits<double>::infinity();
};

MarkedForest sample_gw_forest(std::size_t initial_count, double rate, std::uint64_t seed,
                              const GwOptions& options = {});

enum class ConditionedMethod { exact_shape, rejection };

struct ConditionedOptions {
    ConditionedMethod method = ConditionedMethod::exact_shape;
    std::size_t max_rejection_attempts = 10'000'000;
    int max_resamples = 16;
};

/// Uniform full binary plane tree with `total_vertices` vertices (odd) and iid
/// Exponential(rate) lifetimes; the law of critical binary GW conditioned on
/// total progeny.
MarkedPlaneTree sample_conditioned_tree(std::size_t total_vertices, double rate, std::uint64_t seed,
                                        const ConditionedOptions& options = {});

/// Random plane shape only, as preorder child counts (0 or 2). Exposed for tests.
std::vector<int> sample_full_binary_shape(std::size_t total_vertices, Engine& engine);

/// Builds a marked tree from a preorder child-count code and per-vertex lifetimes.
MarkedPlaneTree tree_from_preorder(const std::vector<int>& child_counts,
                                   const std::vector<double>& lifetimes);

/// {v : birth <= t < death} in plane order.
std::vector<VertexId> alive_set(const MarkedForest& forest, double t);

double extinction_time(const MarkedForest& forest);

/// Piecewise-linear contour (Harris) path of a single tree.
struct ContourPath {
    std::vector<double> times;    // breakpoints, strictly increasing
    std::vector<double> heights;  // height at each breakpoint
    std::vector<double> visit;    // per vertex: first time the contour reaches its death height

    double duration() const { return times.empty() ? 0.0 : times.back(); }
    double at(double s) const;
    /// Minimum of the path over [s1, s2] (order-insensitive).
    double min_between(double s1, double s2) const;
    /// Evenly spaced samples including both endpoints.
    std::vector<double> sample(std::size_t samples) const;
    /// d(v1,v2) recovered from the path: C(s)+C(s')-2 min C.
    double distance(VertexId v1, VertexId v2) const;
};

ContourPath contour_function(const MarkedPlaneTree& tree);

double graph_distance(const MarkedForest& forest, VertexId v1, VertexId v2);

}  // namespace bloewner
