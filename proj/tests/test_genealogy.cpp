#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>

#include "bloewner/errors.hpp"
#include "bloewner/genealogy.hpp"
#include "support.hpp"

using namespace bloewner;

namespace {

std::string code_string(const std::vector<int>& code) {
    std::string s;
    for (int c : code) s += static_cast<char>('0' + c);
    return s;
}

// Distance between death points via explicit ancestor sets.
double brute_distance(const MarkedForest& f, VertexId a, VertexId b) {
    std::set<VertexId> up;
    for (std::optional<VertexId> c = a; c; c = f.vertex(*c).parent) up.insert(*c);
    std::optional<VertexId> c = b;
    while (!up.count(*c)) c = f.vertex(*c).parent;
    return f.vertex(a).death + f.vertex(b).death - 2.0 * f.vertex(*c).death;
}

}  // namespace

TEST_CASE("full binary shapes are uniform over the Catalan family") {
    // 7 vertices: C_3 = 5 plane shapes.
    Engine eng = make_engine(stage_key(11, "shape-test"));
    std::map<std::string, int> counts;
    const int draws = 5000;
    for (int i = 0; i < draws; ++i) counts[code_string(sample_full_binary_shape(7, eng))]++;
    CHECK(counts.size() == 5);
    const double expected = draws / 5.0;
    double chi2 = 0.0;
    for (const auto& [code, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 18.47);  // chi-square, 4 dof, p = 0.001
}

TEST_CASE("critical binary branching: the root branches with probability one half") {
    const int trials = 4000;
    int branched = 0;
    GwOptions o;
    o.horizon = 40.0;
    for (int s = 0; s < trials; ++s) {
        const MarkedForest f = sample_gw_forest(1, 1.0, static_cast<std::uint64_t>(s), o);
        if (!f.vertex(f.roots().front()).children.empty()) ++branched;
    }
    const double p = static_cast<double>(branched) / trials;
    CHECK(std::abs(p - 0.5) <= 4.0 * std::sqrt(0.25 / trials));
}

TEST_CASE("lifetimes have mean 1/rate") {
    double sum = 0.0;
    double sq = 0.0;
    std::size_t count = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const MarkedPlaneTree t = sample_conditioned_tree(21, 4.0, s);
        for (const auto& v : t.forest().vertices()) {
            sum += v.lifetime;
            sq += v.lifetime * v.lifetime;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double se = std::sqrt((sq / static_cast<double>(count) - mean * mean) / static_cast<double>(count));
    CHECK(std::abs(mean - 0.25) <= 4.0 * se);
}

TEST_CASE("forest invariants and plane order") {
    const MarkedForest f = sample_gw_forest(3, 2.0, 7);
    CHECK(f.tree_count() == 3);
    for (VertexId v = 0; v < f.size(); ++v) {
        const Vertex& x = f.vertex(v);
        CHECK((x.children.empty() || x.children.size() == 2));
        CHECK(x.death == doctest::Approx(x.birth + x.lifetime).epsilon(1e-15));
        for (VertexId c : x.children) {
            CHECK(c > v);
            CHECK(f.vertex(c).birth == x.death);
            CHECK(f.is_ancestor(v, c));
        }
    }
}

TEST_CASE("sampling is a deterministic function of the seed") {
    const MarkedForest a = sample_gw_forest(2, 1.5, 99);
    const MarkedForest b = sample_gw_forest(2, 1.5, 99);
    REQUIRE(a.size() == b.size());
    for (VertexId v = 0; v < a.size(); ++v) {
        CHECK(a.vertex(v).lifetime == b.vertex(v).lifetime);
        CHECK(a.vertex(v).path_hash == b.vertex(v).path_hash);
    }
}

TEST_CASE("horizon truncation leaves late individuals childless") {
    GwOptions o;
    o.horizon = 0.5;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const MarkedForest f = sample_gw_forest(4, 3.0, s, o);
        for (const auto& v : f.vertices()) {
            if (v.death > 0.5) CHECK(v.children.empty());
        }
    }
}

TEST_CASE("conditioned trees have the requested size") {
    for (std::size_t n : {1u, 3u, 11u, 101u}) {
        const MarkedPlaneTree t = sample_conditioned_tree(n, 1.0, n);
        CHECK(t.size() == n);
    }
    CHECK_THROWS_AS(sample_conditioned_tree(10, 1.0, 1), InvalidArgument);
}

TEST_CASE("rejection and exact-shape samplers agree on shape frequencies") {
    ConditionedOptions rej;
    rej.method = ConditionedMethod::rejection;
    std::map<std::size_t, int> leaf_left_exact, leaf_left_rej;
    const int draws = 1500;
    for (int s = 0; s < draws; ++s) {
        const auto a = sample_conditioned_tree(5, 1.0, static_cast<std::uint64_t>(s));
        const auto b = sample_conditioned_tree(5, 1.0, static_cast<std::uint64_t>(s), rej);
        leaf_left_exact[a.vertex(a.vertex(a.root()).children[0]).children.size()]++;
        leaf_left_rej[b.vertex(b.vertex(b.root()).children[0]).children.size()]++;
    }
    // Two shapes with 5 vertices, each with probability 1/2.
    for (auto* m : {&leaf_left_exact, &leaf_left_rej}) {
        const double p = static_cast<double>((*m)[0]) / draws;
        CHECK(std::abs(p - 0.5) <= 4.0 * std::sqrt(0.25 / draws));
    }
}

TEST_CASE("tree_from_preorder builds and rejects codes") {
    const MarkedPlaneTree t = tree_from_preorder({2, 2, 0, 0, 0}, {1.0, 0.5, 0.25, 2.0, 3.0});
    CHECK(t.size() == 5);
    CHECK(t.vertex(0).children == std::vector<VertexId>{1, 4});
    CHECK(t.vertex(2).birth == doctest::Approx(1.5));
    CHECK(t.vertex(2).death == doctest::Approx(1.75));
    CHECK(extinction_time(t) == doctest::Approx(4.0));
    CHECK_THROWS_AS(tree_from_preorder({2, 0}, {1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(tree_from_preorder({0, 0}, {1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(tree_from_preorder({0}, {-1.0}), InvalidArgument);
}

TEST_CASE("alive set matches a direct filter") {
    const MarkedForest f = sample_gw_forest(3, 1.0, 5);
    for (double t : {0.0, 0.3, 0.9, 1.7}) {
        std::vector<VertexId> want;
        for (VertexId v = 0; v < f.size(); ++v) {
            if (f.vertex(v).birth <= t && t < f.vertex(v).death) want.push_back(v);
        }
        CHECK(alive_set(f, t) == want);
    }
}

TEST_CASE("contour distances equal genealogical distances") {
    const MarkedPlaneTree t = sample_conditioned_tree(21, 1.0, 3);
    const ContourPath c = contour_function(t);
    CHECK(c.at(0.0) == doctest::Approx(0.0));
    CHECK(c.at(c.duration()) == doctest::Approx(0.0).epsilon(1e-12));
    for (VertexId a = 0; a < t.size(); ++a) {
        for (VertexId b = 0; b < t.size(); ++b) {
            const double want = brute_distance(t, a, b);
            CHECK(graph_distance(t, a, b) == doctest::Approx(want).epsilon(1e-12));
            CHECK(c.distance(a, b) == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("validation rejects broken forests") {
    std::vector<Vertex> vs(2);
    vs[0].lifetime = 1.0;
    vs[0].death = 1.0;
    vs[0].children = {1};
    vs[1].parent = 0;
    vs[1].birth = 1.0;
    vs[1].lifetime = 1.0;
    vs[1].death = 2.0;
    CHECK_THROWS_AS(MarkedForest::from_vertices(vs), InvalidArgument);
    CHECK_NOTHROW(test::roots({1.0, 2.0}));
    CHECK_THROWS_AS(test::roots({0.0}), InvalidArgument);
}
