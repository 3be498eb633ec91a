#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bloewner/acceptance.hpp"
#include "bloewner/errors.hpp"
#include "bloewner/io.hpp"
#include "bloewner/pipeline.hpp"

using namespace bloewner;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAngleTol = 0.02;
constexpr double kCapacityRel = 1e-6;

Beta parse_beta(const std::string& text) {
    if (text == "inf" || text == "infinity") return Beta::infinite();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw InvalidArgument("--beta: expected a number or inf (got '" + text + "')");
    return Beta(v);
}

std::vector<double> parse_reals(const std::string& text, const char* what) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(text);
    while (is >> item) {
        std::istringstream cs(item);
        std::string part;
        while (std::getline(cs, part, ',')) {
            if (part.empty()) continue;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(part, &used);
            } catch (const std::logic_error&) {
                used = 0;
            }
            if (used == 0 || used != part.size()) {
                throw InvalidArgument(std::string(what) + ": expected numbers (got '" + part + "')");
            }
            out.push_back(v);
        }
    }
    return out;
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

TracedHull trace_from(const DrivingPath& path, double dt, double eps) {
    SolverConfig sc;
    sc.dt = dt;
    sc.eps = eps;
    return trace_hull(path, sc);
}

int print_criterion(const CriterionResult& r, bool verbose) {
    std::cout << result_line(r) << "\n";
    if (verbose) {
        for (const auto& d : r.diagnostics) std::cout << "    " << d << "\n";
    }
    std::cout.flush();
    return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching Loewner evolutions: genealogies, drivers, hulls and superprocess checks"};
    app.set_version_flag("--version", kToolVersion);
    std::string config_file;
    app.add_option("--config", config_file, "Run the staged pipeline described by an INI file");

    // tree
    auto* tree = app.add_subcommand("tree", "Genealogy sampling");
    auto* tree_sample = tree->add_subcommand("sample", "Sample a Galton-Watson forest or a conditioned tree");
    std::size_t initial = 1;
    double rate = 1.0;
    std::uint64_t seed = 1;
    std::size_t conditioned_n = 0;
    double tree_horizon = std::numeric_limits<double>::infinity();
    std::string out;
    tree_sample->add_option("--initial", initial, "Initial individuals")->check(CLI::PositiveNumber);
    tree_sample->add_option("--rate", rate, "Exponential lifetime rate")->check(CLI::PositiveNumber);
    tree_sample->add_option("--seed", seed, "Global seed");
    tree_sample->add_option("--conditioned-n", conditioned_n, "Condition on this odd total progeny");
    tree_sample->add_option("--horizon", tree_horizon, "No branching after this time");
    tree_sample->add_option("--out", out, "Output JSON file")->required();
    tree->require_subcommand(1);

    // drive
    auto* drive = app.add_subcommand("drive", "Evolve the driving atoms along a genealogy");
    std::string tree_file, mode = "coulomb", angles_file, beta_text = "inf";
    double alpha_const = 0.0, dt = 1e-3, tolerance = 1e-8, horizon = std::numeric_limits<double>::infinity();
    drive->add_option("--tree", tree_file, "Tree JSON")->required()->check(CLI::ExistingFile);
    drive->add_option("--mode", mode, "coulomb or dyson")->check(CLI::IsMember({"coulomb", "dyson"}));
    auto* alpha_opt = drive->add_option("--alpha-const", alpha_const, "Constant repulsion strength");
    auto* angles_opt =
        drive->add_option("--angles", angles_file, "File of per-vertex angles (one value, or one per vertex)")
            ->check(CLI::ExistingFile);
    alpha_opt->excludes(angles_opt);
    drive->add_option("--beta", beta_text, "Inverse temperature or inf");
    drive->add_option("--dt", dt, "Maximal step")->check(CLI::PositiveNumber);
    drive->add_option("--tolerance", tolerance, "Local error target (<= 0 for fixed steps)");
    drive->add_option("--horizon", horizon, "Stop time");
    drive->add_option("--seed", seed, "Global seed");
    drive->add_option("--out", out, "Output prefix (PREFIX.csv, PREFIX.json)")->required();

    // wedge
    auto* wedge = app.add_subcommand("wedge", "Two-slit wedge constants");
    auto* wedge_constants_cmd = wedge->add_subcommand("constants", "Conformal constants for the angles");
    double theta1 = 0.0, theta2 = 0.0;
    bool as_json = false;
    wedge_constants_cmd->add_option("--theta1", theta1, "Left slit angle")->required();
    wedge_constants_cmd->add_option("--theta2", theta2, "Right slit angle")->required();
    wedge_constants_cmd->add_flag("--json", as_json, "Print JSON");
    wedge->require_subcommand(1);

    // hull
    auto* hull = app.add_subcommand("hull", "Hull tracing");
    auto* hull_trace = hull->add_subcommand("trace", "Trace the hull of a driving path");
    std::string path_prefix;
    double trace_dt = 1e-3, eps = 0.0;
    bool no_svg = false;
    hull_trace->add_option("--path", path_prefix, "Driving path prefix")->required();
    hull_trace->add_option("--dt", trace_dt, "Tip sampling step")->check(CLI::PositiveNumber);
    hull_trace->add_option("--eps", eps, "Tip height (<= 0 for the default)");
    hull_trace->add_option("--out", out, "Output prefix (PREFIX.csv, PREFIX.svg)")->required();
    hull_trace->add_flag("--no-svg", no_svg, "Skip the SVG rendering");
    hull->require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "Geometric checks");
    auto* v_angles = verify->add_subcommand("angles", "Two-slit base angle against pi/(alpha+2)");
    double v_alpha = 1.0;
    v_angles->add_option("--alpha", v_alpha, "Repulsion strength")->check(CLI::PositiveNumber);
    v_angles->add_option("--dt", trace_dt, "Tip sampling step")->check(CLI::PositiveNumber);
    std::vector<CLI::App*> path_checks;
    for (const char* name : {"embedding", "capacity", "growth"}) {
        auto* sub = verify->add_subcommand(name, std::string("Check ") + name + " of a traced path");
        sub->add_option("--path", path_prefix, "Driving path prefix")->required();
        sub->add_option("--dt", trace_dt, "Tip sampling step")->check(CLI::PositiveNumber);
        sub->add_option("--eps", eps, "Tip height (<= 0 for the default)");
        path_checks.push_back(sub);
    }
    verify->require_subcommand(1);

    // superprocess
    auto* sp = app.add_subcommand("superprocess", "Superprocess Monte Carlo");
    auto* sp_mc = sp->add_subcommand("mc", "Martingale-problem Monte Carlo");
    std::size_t n = 50, replicas = 1000;
    std::vector<std::string> phis;
    std::string t_text = "0.25,0.5";
    std::string sp_beta = "8";
    bool conditioned = false, samples = false;
    double eps_prime = 0.05;
    unsigned jobs = 1;
    sp_mc->add_option("--n", n, "Scaling parameter")->check(CLI::PositiveNumber);
    sp_mc->add_option("--replicas", replicas, "Replica count")->check(CLI::PositiveNumber);
    sp_mc->add_option("--beta", sp_beta, "Inverse temperature or inf");
    sp_mc->add_option("--phi", phis, "bump:c,w or stieltjes:re,im (repeatable)")->required();
    sp_mc->add_option("--t", t_text, "Times (unconditioned) or sigma-quantile fractions (conditioned)");
    sp_mc->add_option("--seed", seed, "Global seed");
    sp_mc->add_flag("--conditioned", conditioned, "Conditioned-on-progeny model");
    sp_mc->add_option("--eps-prime", eps_prime, "Stopping level")->check(CLI::Range(0.0, 1.0));
    sp_mc->add_option("--out", out, "Output prefix (PREFIX.json, PREFIX_samples.csv)")->required();
    sp_mc->add_flag("--samples", samples, "Also write per-replica samples");
    sp_mc->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sp->require_subcommand(1);

    // report
    auto* report = app.add_subcommand("report", "Acceptance criteria");
    auto* r_one = report->add_subcommand("criterion", "Run one acceptance criterion");
    auto* r_all = report->add_subcommand("acceptance", "Run every acceptance criterion");
    int criterion_id = 1;
    std::vector<int> ids;
    double scale = 1.0;
    bool verbose = true;
    r_one->add_option("--id", criterion_id, "Criterion number")->required()->check(CLI::Range(1, kCriterionCount));
    r_all->add_option("--ids", ids, "Subset of criteria")->check(CLI::Range(1, kCriterionCount));
    for (auto* r : {r_one, r_all}) {
        r->add_option("--seed", seed, "Global seed");
        r->add_option("--scale", scale, "Replica count multiplier")->check(CLI::PositiveNumber);
        r->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
        r->add_option("--out", out, "Write results as JSON");
        r->add_flag("!--quiet", verbose, "Omit diagnostics");
    }
    report->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!config_file.empty()) {
            const std::string text = read_text(config_file);
            if (config_is_empty(text)) {
                std::cerr << app.help();
                return 2;
            }
            return run_pipeline(parse_config(text), std::cerr);
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
            return 2;
        }

        if (tree_sample->parsed()) {
            const std::uint64_t s = replica_seed(seed, "tree", 0);
            MarkedForest forest;
            if (conditioned_n > 0) {
                forest = sample_conditioned_tree(conditioned_n, rate, s).forest();
            } else {
                GwOptions gw;
                gw.horizon = tree_horizon;
                forest = sample_gw_forest(initial, rate, s, gw);
            }
            write_tree(out, forest, TreeMeta{s, rate, conditioned_n});
            std::cout << "wrote " << out << " (" << forest.size() << " vertices, extinction "
                      << fmt(extinction_time(forest)) << ")\n";
            return 0;
        }

        if (drive->parsed()) {
            const MarkedForest forest = read_tree(tree_file);
            AlphaSchedule alpha = AlphaSchedule::constant(*alpha_opt ? alpha_const : 1.0);
            if (*angles_opt) {
                std::vector<double> angles = parse_reals(read_text(angles_file), "--angles");
                if (angles.size() == 1) angles.assign(forest.size(), angles.front());
                if (angles.size() != forest.size()) {
                    throw InvalidArgument("--angles: expected 1 or " + std::to_string(forest.size()) + " values, got " +
                                          std::to_string(angles.size()));
                }
                alpha = angle_schedule(forest, angles);
            }
            const Beta beta = parse_beta(beta_text);
            if (mode == "dyson" && beta.is_infinite()) throw InvalidArgument("--mode dyson needs a finite --beta");
            FlowConfig fc;
            fc.dt_max = dt;
            fc.tolerance = tolerance;
            fc.horizon = horizon;
            const std::vector<double> x0(forest.tree_count(), 0.0);
            const DrivingPath path = mode == "coulomb"
                                         ? coulomb_flow(forest, alpha, x0, fc)
                                         : dyson_flow(forest, alpha, beta, x0, fc, replica_seed(seed, "drive", 0));
            write_path(out, path);
            std::cout << "wrote " << out << ".csv/.json (to t=" << fmt(path.end_time) << ", max alive "
                      << path.max_alive() << ")\n";
            return 0;
        }

        if (wedge_constants_cmd->parsed()) {
            const WedgeSpec w = wedge_constants(theta1, theta2);
            if (as_json) {
                std::cout << to_json(w).dump(2) << "\n";
            } else {
                std::cout << "a=" << fmt(w.a) << " b=" << fmt(w.b) << " x=" << fmt(w.x) << "\n"
                          << "psi1=" << fmt(w.psi1) << " psi2=" << fmt(w.psi2) << "\n"
                          << "zeta1=" << fmt(w.zeta1) << " zeta2=" << fmt(w.zeta2) << "\n"
                          << "zeta1/sqrt2=" << fmt(w.zeta1_scaled) << " zeta2/sqrt2=" << fmt(w.zeta2_scaled) << "\n";
            }
            return 0;
        }

        if (hull_trace->parsed()) {
            const DrivingPath path = read_path(path_prefix);
            const TracedHull h = trace_from(path, trace_dt, eps);
            write_hull_csv(out + ".csv", h);
            if (!no_svg) write_text(out + ".svg", emit_svg(h));
            for (const auto& w : h.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "wrote " << out << ".csv (" << h.curves.size() << " curves, " << h.point_count()
                      << " points)\n";
            return 0;
        }

        if (v_angles->parsed()) {
            std::vector<Vertex> vs(2);
            for (std::size_t i = 0; i < 2; ++i) {
                vs[i].lifetime = 2.0 + 0.5 * static_cast<double>(i);
                vs[i].death = vs[i].lifetime;
            }
            const MarkedForest forest = MarkedForest::from_vertices(std::move(vs));
            FlowConfig fc;
            fc.horizon = 1.0;
            const std::vector<double> x0{0.0, 0.0};
            const DrivingPath path = coulomb_flow(forest, AlphaSchedule::constant(v_alpha), x0, fc);
            SolverConfig sc;
            sc.dt = trace_dt;
            const BaseAngles ba = base_angles(trace_hull(path, sc), 0.0);
            if (ba.angles.size() != 2) throw NumericalFailure("expected two slits at the origin");
            const double target = angle_from_alpha(v_alpha);
            const double left = kPi - ba.angles[1];
            const double right = ba.angles[0];
            const double err = std::max(std::abs(left - target), std::abs(right - target));
            const bool pass = err <= kAngleTol;
            std::cout << "measured theta: " << fmt(right) << " (right), " << fmt(left) << " (left)\n"
                      << "target pi/(alpha+2): " << fmt(target) << "\n"
                      << "max error " << fmt(err) << " (tolerance " << kAngleTol << "): " << (pass ? "PASS" : "FAIL")
                      << "\n";
            return pass ? 0 : 1;
        }

        for (auto* sub : path_checks) {
            if (!sub->parsed()) continue;
            const DrivingPath path = read_path(path_prefix);
            const TracedHull h = trace_from(path, trace_dt, eps);
            const std::string name = sub->get_name();
            Json doc;
            bool pass = false;
            if (name == "embedding") {
                const EmbeddingReport r = verify_embedding(h);
                doc = to_json(r);
                pass = r.pass;
            } else if (name == "capacity") {
                double worst = 0.0;
                Json rows = Json::array();
                for (const auto& [t, b] : h.capacity_trace) {
                    const double expect = path.integrated_mass(t);
                    const double rel = std::abs(b - expect) / (1.0 + b);
                    worst = std::max(worst, rel);
                    rows.push_back({{"t", t}, {"b_t", b}, {"integrated_mass", expect}, {"relative_error", rel}});
                }
                pass = worst <= kCapacityRel;
                doc = {{"samples", rows}, {"max_relative_error", worst}, {"tolerance", kCapacityRel}, {"pass", pass}};
            } else {
                const GrowthReport r = local_growth_check(path, h, path.end_time);
                doc = to_json(r);
                pass = r.pass;
            }
            std::cout << doc.dump(2) << "\n";
            return pass ? 0 : 1;
        }

        if (sp_mc->parsed()) {
            std::vector<TestFunction> fns;
            for (const auto& p : phis) {
                for (auto& f : TestFunction::parse(p)) fns.push_back(f);
            }
            const std::vector<double> ts = parse_reals(t_text, "--t");
            Json doc;
            bool pass = false;
            if (conditioned) {
                ConditionedMcConfig mc;
                mc.n = n;
                mc.replicas = replicas;
                mc.beta = parse_beta(sp_beta);
                mc.eps_prime = eps_prime;
                mc.phis = fns;
                mc.seed = seed;
                mc.jobs = jobs;
                if (sp_mc->count("--t") > 0) mc.t_fractions = ts;
                const ConditionedReport rep = conditioned_mc(mc);
                doc = to_json(rep);
                pass = rep.pass;
            } else {
                McConfig mc;
                mc.n = n;
                mc.replicas = replicas;
                mc.beta = parse_beta(sp_beta);
                mc.t_list = ts;
                mc.phis = fns;
                mc.seed = seed;
                mc.jobs = jobs;
                mc.keep_samples = samples;
                const MartingaleReport rep = mc_martingale_test(mc);
                doc = to_json(rep);
                pass = rep.pass;
                if (samples) write_samples_csv(out + "_samples.csv", rep, mc);
            }
            write_json(out + ".json", doc);
            std::cout << "wrote " << out << ".json: " << (pass ? "PASS" : "FAIL") << "\n";
            return pass ? 0 : 1;
        }

        if (r_one->parsed() || r_all->parsed()) {
            AcceptanceOptions o;
            o.seed = seed;
            o.jobs = jobs;
            o.replica_scale = scale;
            if (r_one->parsed()) {
                ids = {criterion_id};
            } else if (ids.empty()) {
                for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
            }
            Json doc = Json::array();
            int code = 0;
            for (int id : ids) {
                const CriterionResult r = run_criterion(id, o);
                if (print_criterion(r, verbose) != 0) code = 1;
                doc.push_back({{"id", r.id},
                               {"title", r.title},
                               {"pass", r.pass},
                               {"summary", r.summary},
                               {"diagnostics", r.diagnostics},
                               {"data", r.data},
                               {"seconds", r.seconds}});
            }
            if (!out.empty()) write_json(out, doc);
            return code;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    std::cerr << app.help();
    return 2;
}
