#include <doctest.h>

#include <cmath>
#include <regex>

#include "bloewner/errors.hpp"
#include "bloewner/io.hpp"
#include "bloewner/pipeline.hpp"
#include "support.hpp"

using namespace bloewner;

TEST_CASE("doubles print with 17 significant digits") {
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("tree JSON round trip") {
    test::TempDir dir;
    const MarkedForest f = sample_gw_forest(3, 1.5, 21);
    write_tree(dir.path / "t.json", f, TreeMeta{21, 1.5, 0});
    TreeMeta meta;
    const MarkedForest g = read_tree(dir.path / "t.json", &meta);
    CHECK(meta.seed == 21);
    CHECK(meta.rate == 1.5);
    REQUIRE(g.size() == f.size());
    for (VertexId v = 0; v < f.size(); ++v) {
        CHECK(g.vertex(v).parent == f.vertex(v).parent);
        CHECK(g.vertex(v).children == f.vertex(v).children);
        CHECK(g.vertex(v).birth == f.vertex(v).birth);
        CHECK(g.vertex(v).death == f.vertex(v).death);
    }
    const Json doc = tree_to_json(f, TreeMeta{21, 1.5, 0});
    CHECK(doc.contains("vertices"));
    CHECK_THROWS(tree_from_json(Json::parse(R"({"vertices": [{"id": 0}]})")));
}

TEST_CASE("driving path round trip is exact") {
    test::TempDir dir;
    const MarkedPlaneTree t = sample_conditioned_tree(9, 1.0, 6);
    FlowConfig fc;
    const std::vector<double> x0{0.0};
    const DrivingPath p = dyson_flow(t, AlphaSchedule::constant(1.0), Beta(4.0), x0, fc, 3);
    write_path(dir.path / "p", p);
    const DrivingPath q = read_path(dir.path / "p");
    REQUIRE(q.segments.size() == p.segments.size());
    for (std::size_t s = 0; s < p.segments.size(); ++s) {
        CHECK(q.segments[s].times == p.segments[s].times);
        CHECK(q.segments[s].positions == p.segments[s].positions);
        CHECK(q.segments[s].alive == p.segments[s].alive);
    }
    CHECK(q.events.size() == p.events.size());
    CHECK(q.beta == p.beta);
    CHECK(q.seed == p.seed);
    const std::string csv = read_text(dir.path / "p.csv");
    CHECK(csv.rfind("t_time,vertex_id,position_length\n", 0) == 0);
}

TEST_CASE("emitted files are byte-identical across runs") {
    test::TempDir dir;
    const MarkedPlaneTree t = sample_conditioned_tree(7, 1.0, 2);
    FlowConfig fc;
    const std::vector<double> x0{0.0};
    for (const char* name : {"a", "b"}) {
        const DrivingPath p = coulomb_flow(t, AlphaSchedule::constant(1.0), x0, fc);
        write_path(dir.path / name, p);
    }
    CHECK(read_text(dir.path / "a.csv") == read_text(dir.path / "b.csv"));
}

TEST_CASE("SVG: one polyline per vertex and coordinates round trip") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    const TracedHull single = trace_hull(test::free_particles({0.0}, 1.0, 1.0), cfg);
    const std::string one = emit_svg(single);
    const std::regex poly("<polyline");
    CHECK(std::distance(std::sregex_iterator(one.begin(), one.end(), poly), std::sregex_iterator()) == 1);
    CHECK(one.find("<line") != std::string::npos);

    const MarkedPlaneTree t = sample_conditioned_tree(11, 1.0, 3);
    FlowConfig fc;
    const std::vector<double> x0{0.0};
    const TracedHull h = trace_hull(coulomb_flow(t, AlphaSchedule::constant(1.0), x0, fc), cfg);
    SvgStyle style;
    const std::string svg = emit_svg(h, style);
    const auto curves = parse_svg(svg);
    REQUIRE(curves.size() == 11);
    for (const auto& c : curves) {
        const HullCurve* src = h.curve(c.vertex);
        REQUIRE(src);
        REQUIRE(c.points.size() == src->points.size());
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            const double scale = 1.0 + std::abs(src->points[k]);
            CHECK(std::abs(c.points[k] - src->points[k]) <= 1e-7 * scale);
        }
    }
    CHECK(emit_svg(h, style) == svg);
}

TEST_CASE("reports serialize") {
    const Json w = to_json(wedge_constants(0.5, 2.0));
    for (const char* k : {"a", "b", "x", "psi1", "psi2", "zeta1", "zeta2"}) CHECK(w.contains(k));
}

TEST_CASE("sha256 digest") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config: every problem is reported at once") {
    const std::string text = R"(seed = 3
[tree]
rate = -1
colour = red
[driver]
mode = brownian
dt = abc
[bogus]
x = 1
)";
    try {
        parse_config(text);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(e.problems().size() == 5);
        const std::string msg = e.what();
        CHECK(msg.find("[tree] rate") != std::string::npos);
        CHECK(msg.find("colour") != std::string::npos);
        CHECK(msg.find("mode") != std::string::npos);
        CHECK(msg.find("[driver] dt") != std::string::npos);
        CHECK(msg.find("bogus") != std::string::npos);
    }
}

TEST_CASE("config: valid documents and empty detection") {
    CHECK(config_is_empty(""));
    CHECK(config_is_empty("; comment\n\n[tree]\n"));
    CHECK(!config_is_empty("seed = 1\n"));
    const PipelineConfig c = parse_config("seed = 5\nstages = tree, drive\n[tree]\nconditioned_n = 11\n"
                                          "[driver]\nbeta = inf\nangle = 1.0471975511965976\n");
    CHECK(c.seed == 5);
    CHECK(c.stages == std::vector<std::string>{"tree", "drive"});
    CHECK(c.conditioned_n == 11);
    CHECK(c.beta.is_infinite());
    CHECK_THROWS_AS(parse_config("stages = hull\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[tree]\nconditioned_n = 10\n"), ConfigError);
}

TEST_CASE("pipeline runs are reproducible and the manifest matches the files") {
    test::TempDir dir;
    const auto run = [&](const char* sub) {
        PipelineConfig c = parse_config("seed = 4\n[tree]\nconditioned_n = 7\n[driver]\nangle = 1.0471975511965976\n"
                                        "[loewner]\ndt = 0.002\n");
        c.dir = dir.path / sub;
        std::ostringstream log;
        return run_pipeline(c, log);
    };
    CHECK(run("a") == 0);
    CHECK(run("b") == 0);
    for (const char* f : {"tree.json", "path.csv", "path.json", "hull.csv", "hull.svg", "verify.json"}) {
        CHECK(read_text(dir.path / "a" / f) == read_text(dir.path / "b" / f));
    }
    const Json m = Json::parse(read_text(dir.path / "a" / "manifest.json"));
    CHECK(m["tool_version"] == kToolVersion);
    for (const auto& o : m["outputs"]) {
        CHECK(o["sha256"] == sha256_hex(read_text(dir.path / "a" / o["file"].get<std::string>())));
    }
}

TEST_CASE("exit codes by error kind") {
    CHECK(exit_code_for(InvalidArgument("x")) == 2);
    CHECK(exit_code_for(NumericalFailure("x")) == 3);
    CHECK(exit_code_for(CapExceeded("x")) == 3);
    CHECK(exit_code_for(ConfigError({"x"})) == 2);
}
