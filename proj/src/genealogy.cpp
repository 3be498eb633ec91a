#include "bloewner/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "bloewner/errors.hpp"

namespace bloewner {

namespace {

constexpr std::uint64_t kRootTag = 0x726f6f74ULL;

std::uint64_t root_hash(std::size_t tree_index) { return mix_key(kRootTag, tree_index); }
std::uint64_t child_hash(std::uint64_t parent, std::size_t child_index) {
    return mix_key(parent, child_index + 1);
}

void require_finite_positive(double value, const char* what) {
    if (!std::isfinite(value) || value <= 0.0) {
        throw InvalidArgument(std::string(what) + " must be finite and positive, got " +
                              std::to_string(value));
    }
}

bool deaths_distinct(const MarkedForest& forest) {
    std::vector<double> deaths;
    deaths.reserve(forest.size());
    for (const auto& v : forest.vertices()) deaths.push_back(v.death);
    std::sort(deaths.begin(), deaths.end());
    return std::adjacent_find(deaths.begin(), deaths.end()) == deaths.end();
}

// Lifetime stream for a vertex: depends on (seed, attempt, vertex path) only.
Engine vertex_engine(std::uint64_t seed, int attempt, std::uint64_t path_hash) {
    const std::uint64_t key = mix_key(mix_key(stage_key(seed, "genealogy"), attempt), path_hash);
    return make_engine(key);
}

}  // namespace

MarkedForest MarkedForest::from_vertices(std::vector<Vertex> vertices) {
    const std::size_t n = vertices.size();
    if (n == 0) throw InvalidArgument("forest must contain at least one vertex");
    for (std::size_t i = 0; i < n; ++i) {
        for (VertexId c : vertices[i].children) {
            if (c >= n) throw InvalidArgument("child id out of range at vertex " + std::to_string(i));
        }
        if (vertices[i].parent && *vertices[i].parent >= n) {
            throw InvalidArgument("parent id out of range at vertex " + std::to_string(i));
        }
    }

    std::vector<VertexId> old_roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (!vertices[i].parent) old_roots.push_back(static_cast<VertexId>(i));
    }
    if (old_roots.empty()) throw InvalidArgument("forest has no initial individual");

    // Renumber in preorder, tree by tree.
    std::vector<VertexId> new_id(n, std::numeric_limits<VertexId>::max());
    std::vector<VertexId> order;
    order.reserve(n);
    for (VertexId r : old_roots) {
        std::vector<VertexId> stack{r};
        while (!stack.empty()) {
            VertexId v = stack.back();
            stack.pop_back();
            if (new_id[v] != std::numeric_limits<VertexId>::max()) {
                throw InvalidArgument("vertex reachable twice; not a forest");
            }
            new_id[v] = static_cast<VertexId>(order.size());
            order.push_back(v);
            const auto& ch = vertices[v].children;
            for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
        }
    }
    if (order.size() != n) throw InvalidArgument("forest contains vertices unreachable from a root");

    MarkedForest forest;
    forest.vertices_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vertex v = std::move(vertices[order[k]]);
        if (v.parent) v.parent = new_id[*v.parent];
        for (auto& c : v.children) c = new_id[c];
        forest.vertices_[k] = std::move(v);
    }
    for (std::size_t t = 0; t < old_roots.size(); ++t) {
        const VertexId r = new_id[old_roots[t]];
        forest.roots_.push_back(r);
        forest.vertices_[r].tree = static_cast<std::uint32_t>(t);
        forest.vertices_[r].path_hash = root_hash(t);
    }
    // Preorder guarantees parents precede children.
    for (std::size_t k = 0; k < n; ++k) {
        const Vertex& v = forest.vertices_[k];
        for (std::size_t c = 0; c < v.children.size(); ++c) {
            Vertex& child = forest.vertices_[v.children[c]];
            child.tree = v.tree;
            child.path_hash = child_hash(v.path_hash, c);
        }
    }
    forest.validate();
    return forest;
}

void MarkedForest::validate() const {
    if (vertices_.empty()) throw InvalidArgument("forest is empty");
    const double tol = 1e-12;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        const Vertex& v = vertices_[i];
        const std::string where = " (vertex " + std::to_string(i) + ")";
        if (!(v.lifetime > 0.0) || !std::isfinite(v.lifetime)) {
            throw InvalidArgument("lifetime must be positive and finite" + where);
        }
        if (!std::isfinite(v.birth) || v.birth < 0.0) {
            throw InvalidArgument("birth time must be finite and nonnegative" + where);
        }
        if (std::abs(v.death - (v.birth + v.lifetime)) > tol * (1.0 + std::abs(v.death))) {
            throw InvalidArgument("death != birth + lifetime" + where);
        }
        if (!(v.death > v.birth)) throw InvalidArgument("death must exceed birth" + where);
        if (v.children.size() != 0 && v.children.size() != 2) {
            throw InvalidArgument("vertex must have 0 or 2 children" + where);
        }
        for (VertexId c : v.children) {
            const Vertex& child = vertices_.at(c);
            if (!child.parent || *child.parent != i) {
                throw InvalidArgument("child/parent links disagree" + where);
            }
            if (child.birth != v.death) {
                throw InvalidArgument("child birth must equal parent death" + where);
            }
        }
        if (!v.parent && v.birth != 0.0) {
            throw InvalidArgument("initial individuals must be born at time 0" + where);
        }
    }
    if (!deaths_distinct(*this)) throw InvalidArgument("death times are not pairwise distinct");
}

bool MarkedForest::is_ancestor(VertexId ancestor, VertexId v) const {
    std::optional<VertexId> cur = v;
    while (cur) {
        if (*cur == ancestor) return true;
        cur = vertices_.at(*cur).parent;
    }
    return false;
}

MarkedPlaneTree::MarkedPlaneTree(MarkedForest forest) : forest_(std::move(forest)) {
    if (forest_.tree_count() != 1) {
        throw InvalidArgument("a plane tree must have exactly one initial individual, got " +
                              std::to_string(forest_.tree_count()));
    }
}

MarkedForest sample_gw_forest(std::size_t initial_count, double rate, std::uint64_t seed,
                              const GwOptions& options) {
    if (initial_count < 1) throw InvalidArgument("initial_count must be at least 1");
    require_finite_positive(rate, "rate");

    for (int attempt = 0; attempt <= options.max_resamples; ++attempt) {
        std::vector<Vertex> vertices;
        std::deque<VertexId> queue;
        for (std::size_t r = 0; r < initial_count; ++r) {
            Vertex v;
            v.path_hash = root_hash(r);
            v.tree = static_cast<std::uint32_t>(r);
            vertices.push_back(v);
            queue.push_back(static_cast<VertexId>(r));
        }
        while (!queue.empty()) {
            const VertexId id = queue.front();
            queue.pop_front();
            Engine eng = vertex_engine(seed, attempt, vertices[id].path_hash);
            vertices[id].lifetime = exponential(eng, rate);
            vertices[id].death = vertices[id].birth + vertices[id].lifetime;
            if (uniform_open(eng) < 0.5 && vertices[id].death <= options.horizon) {
                if (vertices.size() + 2 > options.vertex_cap) {
                    throw CapExceeded("Galton-Watson forest exceeded the vertex cap of " +
                                      std::to_string(options.vertex_cap));
                }
                for (std::size_t c = 0; c < 2; ++c) {
                    Vertex child;
                    child.parent = id;
                    child.birth = vertices[id].death;
                    child.tree = vertices[id].tree;
                    child.path_hash = child_hash(vertices[id].path_hash, c);
                    const auto cid = static_cast<VertexId>(vertices.size());
                    vertices[id].children.push_back(cid);
                    vertices.push_back(child);
                    queue.push_back(cid);
                }
            }
        }
        std::vector<double> deaths;
        for (const auto& v : vertices) deaths.push_back(v.death);
        std::sort(deaths.begin(), deaths.end());
        if (std::adjacent_find(deaths.begin(), deaths.end()) != deaths.end()) continue;
        return MarkedForest::from_vertices(std::move(vertices));
    }
    throw NumericalFailure("could not draw distinct death times after " +
                           std::to_string(options.max_resamples) + " resamples");
}

std::vector<int> sample_full_binary_shape(std::size_t total_vertices, Engine& engine) {
    if (total_vertices % 2 == 0 || total_vertices == 0) {
        throw InvalidArgument("total_vertices must be odd: a full binary plane tree with L leaves has 2L-1 "
                              "vertices (got " + std::to_string(total_vertices) + ")");
    }
    const std::size_t leaves = (total_vertices + 1) / 2;
    std::vector<int> code(total_vertices, 0);
    std::fill(code.begin(), code.begin() + static_cast<std::ptrdiff_t>(leaves - 1), 2);
    for (std::size_t i = total_vertices - 1; i > 0; --i) {
        const std::size_t j = engine() % (i + 1);
        std::swap(code[i], code[j]);
    }
    // Cycle lemma: exactly one rotation is a valid Lukasiewicz word; it starts
    // right after the first index where the partial sum is minimal.
    long sum = 0;
    long best = 1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < total_vertices; ++i) {
        sum += code[i] - 1;
        if (sum < best) {
            best = sum;
            arg = i;
        }
    }
    std::rotate(code.begin(), code.begin() + static_cast<std::ptrdiff_t>((arg + 1) % total_vertices),
                code.end());
    return code;
}

MarkedPlaneTree tree_from_preorder(const std::vector<int>& child_counts,
                                   const std::vector<double>& lifetimes) {
    if (child_counts.size() != lifetimes.size() || child_counts.empty()) {
        throw InvalidArgument("preorder code and lifetimes must be nonempty and of equal length");
    }
    std::vector<Vertex> vertices(child_counts.size());
    struct Open {
        VertexId id;
        int remaining;
    };
    std::vector<Open> stack;
    for (std::size_t i = 0; i < child_counts.size(); ++i) {
        Vertex& v = vertices[i];
        if (i > 0) {
            if (stack.empty()) throw InvalidArgument("preorder code describes more than one tree");
            Open& top = stack.back();
            v.parent = top.id;
            v.birth = vertices[top.id].death;
            vertices[top.id].children.push_back(static_cast<VertexId>(i));
            if (--top.remaining == 0) stack.pop_back();
        }
        v.lifetime = lifetimes[i];
        v.death = v.birth + v.lifetime;
        if (child_counts[i] != 0 && child_counts[i] != 2) {
            throw InvalidArgument("preorder code entries must be 0 or 2");
        }
        if (child_counts[i] == 2) stack.push_back({static_cast<VertexId>(i), 2});
    }
    if (!stack.empty()) throw InvalidArgument("preorder code is incomplete");
    return MarkedPlaneTree(MarkedForest::from_vertices(std::move(vertices)));
}

namespace {

// Attach iid exponential lifetimes keyed by vertex path; resample on collisions.
MarkedPlaneTree attach_lifetimes(const std::vector<int>& code, double rate, std::uint64_t seed,
                                 int max_resamples) {
    // Path hashes depend on structure only.
    std::vector<std::uint64_t> hashes(code.size());
    struct Open {
        std::uint64_t hash;
        std::size_t next_child;
    };
    std::vector<Open> stack;
    for (std::size_t i = 0; i < code.size(); ++i) {
        if (i == 0) {
            hashes[i] = root_hash(0);
        } else {
            if (stack.empty()) throw InvalidArgument("preorder code describes more than one tree");
            Open& top = stack.back();
            hashes[i] = child_hash(top.hash, top.next_child);
            if (++top.next_child == 2) stack.pop_back();
        }
        if (code[i] == 2) stack.push_back({hashes[i], 0});
    }
    for (int attempt = 0; attempt <= max_resamples; ++attempt) {
        std::vector<double> life(code.size());
        for (std::size_t i = 0; i < code.size(); ++i) {
            Engine eng = vertex_engine(seed, attempt, hashes[i]);
            life[i] = exponential(eng, rate);
        }
        try {
            return tree_from_preorder(code, life);
        } catch (const InvalidArgument&) {
            continue;  // death-time collision
        }
    }
    throw NumericalFailure("could not draw distinct death times for conditioned tree");
}

}  // namespace

MarkedPlaneTree sample_conditioned_tree(std::size_t total_vertices, double rate, std::uint64_t seed,
                                        const ConditionedOptions& options) {
    require_finite_positive(rate, "rate");
    if (total_vertices % 2 == 0 || total_vertices == 0) {
        throw InvalidArgument("total_vertices must be odd: a full binary plane tree with L leaves has 2L-1 "
                              "vertices (got " + std::to_string(total_vertices) + ")");
    }
    std::vector<int> code;
    if (options.method == ConditionedMethod::exact_shape) {
        Engine eng = make_engine(stage_key(seed, "conditioned-shape"));
        code = sample_full_binary_shape(total_vertices, eng);
    } else {
        Engine eng = make_engine(stage_key(seed, "conditioned-rejection"));
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt >= options.max_rejection_attempts) {
                throw CapExceeded("rejection sampler exceeded " +
                                  std::to_string(options.max_rejection_attempts) + " attempts");
            }
            // Preorder generation: each open slot flips a fair coin.
            code.clear();
            std::size_t open = 1;
            while (open > 0 && code.size() <= total_vertices) {
                const int c = uniform_open(eng) < 0.5 ? 2 : 0;
                code.push_back(c);
                open = open - 1 + static_cast<std::size_t>(c);
            }
            if (open == 0 && code.size() == total_vertices) break;
        }
    }
    return attach_lifetimes(code, rate, seed, options.max_resamples);
}

std::vector<VertexId> alive_set(const MarkedForest& forest, double t) {
    std::vector<VertexId> out;
    const auto& vs = forest.vertices();
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (vs[i].birth <= t && t < vs[i].death) out.push_back(static_cast<VertexId>(i));
    }
    return out;
}

double extinction_time(const MarkedForest& forest) {
    double t = 0.0;
    for (const auto& v : forest.vertices()) t = std::max(t, v.death);
    return t;
}

ContourPath contour_function(const MarkedPlaneTree& tree) {
    ContourPath path;
    const MarkedForest& f = tree.forest();
    path.visit.assign(f.size(), 0.0);
    double clock = 0.0;
    path.times.push_back(0.0);
    path.heights.push_back(tree.vertex(tree.root()).birth);

    // Iterative DFS: go up an edge, visit children in order, come back down.
    struct Frame {
        VertexId v;
        std::size_t next_child;
    };
    std::vector<Frame> stack;
    auto go_up = [&](VertexId v) {
        clock += f.vertex(v).lifetime;
        path.times.push_back(clock);
        path.heights.push_back(f.vertex(v).death);
        path.visit[v] = clock;
        stack.push_back({v, 0});
    };
    go_up(tree.root());
    while (!stack.empty()) {
        Frame& top = stack.back();
        const Vertex& v = f.vertex(top.v);
        if (top.next_child < v.children.size()) {
            const VertexId c = v.children[top.next_child++];
            go_up(c);
            continue;
        }
        clock += v.lifetime;
        path.times.push_back(clock);
        path.heights.push_back(v.birth);
        stack.pop_back();
    }
    return path;
}

double ContourPath::at(double s) const {
    if (times.empty()) return 0.0;
    if (s <= times.front()) return heights.front();
    if (s >= times.back()) return heights.back();
    const auto it = std::upper_bound(times.begin(), times.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - times.begin());
    const double w = (s - times[k - 1]) / (times[k] - times[k - 1]);
    return heights[k - 1] + w * (heights[k] - heights[k - 1]);
}

double ContourPath::min_between(double s1, double s2) const {
    if (s1 > s2) std::swap(s1, s2);
    double m = std::min(at(s1), at(s2));
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] > s1 && times[k] < s2) m = std::min(m, heights[k]);
    }
    return m;
}

std::vector<double> ContourPath::sample(std::size_t samples) const {
    std::vector<double> out;
    if (samples == 0) return out;
    if (samples == 1) return {at(0.0)};
    out.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        out.push_back(at(duration() * static_cast<double>(i) / static_cast<double>(samples - 1)));
    }
    return out;
}

double ContourPath::distance(VertexId v1, VertexId v2) const {
    const double s1 = visit.at(v1);
    const double s2 = visit.at(v2);
    return at(s1) + at(s2) - 2.0 * min_between(s1, s2);
}

double graph_distance(const MarkedForest& forest, VertexId v1, VertexId v2) {
    const Vertex& a = forest.vertex(v1);
    const Vertex& b = forest.vertex(v2);
    if (a.tree != b.tree) {
        throw InvalidArgument("vertices " + std::to_string(v1) + " and " + std::to_string(v2) +
                              " belong to different trees");
    }
    // Climb from v1 marking ancestors, then from v2 until a marked vertex.
    std::vector<VertexId> chain;
    for (std::optional<VertexId> cur = v1; cur; cur = forest.vertex(*cur).parent) chain.push_back(*cur);
    std::optional<VertexId> cur = v2;
    while (cur && std::find(chain.begin(), chain.end(), *cur) == chain.end()) {
        cur = forest.vertex(*cur).parent;
    }
    const double h_eta = forest.vertex(*cur).death;
    return (a.death - h_eta) + (b.death - h_eta);
}

}  // namespace bloewner
