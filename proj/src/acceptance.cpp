#include "bloewner/acceptance.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <unistd.h>

#include "bloewner/errors.hpp"
#include "bloewner/rng.hpp"

namespace bloewner {

namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

// Tolerances.
constexpr double kTwoParticleTol = 1e-6;
constexpr double kWedgeTol = 0.02;
constexpr double kTreeAngleTol = 0.05;
constexpr double kCapacityRel = 1e-6;
constexpr double kRoundTripTol = 1e-6;
constexpr std::size_t kRoundTripProbes = 100;
constexpr double kSemicircleKs = 0.05;
constexpr double kBurgersTol = 0.02;
constexpr double kSupKs = 0.08;
constexpr double kTraceDt = 1e-4;

std::string fmt(double x, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::size_t scaled(std::size_t full, double scale) {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(full) * scale)));
}

SolverConfig trace_config() {
    SolverConfig cfg;
    cfg.dt = kTraceDt;
    return cfg;
}

DrivingPath two_slit_path(double alpha, double mass) {
    std::vector<Vertex> vs(2);
    for (std::size_t i = 0; i < 2; ++i) {
        vs[i].lifetime = 2.0 + 0.5 * static_cast<double>(i);
        vs[i].death = vs[i].lifetime;
    }
    const MarkedForest forest = MarkedForest::from_vertices(std::move(vs));
    FlowConfig fc;
    fc.horizon = 1.0;
    fc.mass_per_atom = mass;
    const std::vector<double> x0{0.0, 0.0};
    return coulomb_flow(forest, AlphaSchedule::constant(alpha), x0, fc);
}

DrivingPath wedge_path(double c1, double c2, double mass) {
    constexpr int kRows = 4000;
    std::vector<double> times;
    std::vector<std::vector<double>> tr(2);
    for (int k = 0; k <= kRows; ++k) {
        const double u = static_cast<double>(k) / kRows;
        const double t = u * u;
        times.push_back(t);
        tr[0].push_back(c1 * std::sqrt(t));
        tr[1].push_back(c2 * std::sqrt(t));
    }
    return explicit_path(std::move(times), 2, tr, mass);
}

MarkedPlaneTree embedding_tree(std::uint64_t seed) {
    return sample_conditioned_tree(11, 1.0, replica_seed(seed, "embedding-tree", 0));
}

DrivingPath tree_path(const MarkedPlaneTree& tree, double mass) {
    const std::vector<double> angles(tree.size(), kPi / 3.0);
    FlowConfig fc;
    fc.mass_per_atom = mass;
    const std::vector<double> x0{0.0};
    return coulomb_flow(tree, angle_schedule(tree, angles), x0, fc);
}

std::pair<double, double> slit_angles(const TracedHull& hull) {
    const BaseAngles ba = base_angles(hull, 0.0);
    if (ba.angles.size() != 2) throw NumericalFailure("expected two slits at the origin");
    return {ba.angles[0], ba.angles[1]};
}

struct SuitePath {
    std::string name;
    DrivingPath path;
    TracedHull hull;
};

const std::vector<SuitePath>& geometry_suite(std::uint64_t seed) {
    static std::map<std::uint64_t, std::unique_ptr<std::vector<SuitePath>>> cache;
    auto& slot = cache[seed];
    if (slot) return *slot;
    auto suite = std::make_unique<std::vector<SuitePath>>();
    const SolverConfig cfg = trace_config();
    for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
        DrivingPath p = two_slit_path(alpha, 1.0);
        TracedHull h = trace_hull(p, cfg);
        suite->push_back({"two-slit alpha=" + fmt(alpha), std::move(p), std::move(h)});
    }
    {
        const double c = balanced_constants(kPi / 4.0).second;
        DrivingPath p = wedge_path(-c, c, 1.0);
        TracedHull h = trace_hull(p, cfg);
        suite->push_back({"balanced wedge theta=pi/4", std::move(p), std::move(h)});
    }
    {
        DrivingPath p = tree_path(embedding_tree(seed), 1.0);
        TracedHull h = trace_hull(p, cfg);
        suite->push_back({"11-vertex tree", std::move(p), std::move(h)});
    }
    slot = std::move(suite);
    return *slot;
}

// ---------------------------------------------------------------------------

CriterionResult two_particle(const AcceptanceOptions&) {
    CriterionResult r;
    r.title = "two-particle exact law";
    const DrivingPath p = two_slit_path(1.0, 1.0);
    const auto& seg = p.segments.back();
    const auto row = seg.row(seg.rows() - 1);
    const auto [lo, hi] = two_particle_exact(1.0, 1.0);
    const double err = std::max(std::abs(row[0] - lo), std::abs(row[1] - hi));
    r.pass = seg.times.back() == 1.0 && err <= kTwoParticleTol;
    r.summary = "x(1) = (" + fmt(row[0], 12) + ", " + fmt(row[1], 12) + "), exact (" + fmt(lo) + ", " + fmt(hi) +
                "), error " + fmt(err, 3) + " (tol " + fmt(kTwoParticleTol) + ")";
    r.data = {{"x", {row[0], row[1]}}, {"exact", {lo, hi}}, {"error", err}};
    return r;
}

CriterionResult wedge_angles(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "wedge angle law";
    r.pass = true;
    const auto& suite = geometry_suite(o.seed);
    std::ostringstream sum;
    double worst_half = 0.0;
    double worst_unit_law = 0.0;
    Json rows = Json::array();
    for (std::size_t i = 0; i < 4; ++i) {
        const double alpha = std::array{0.5, 1.0, 2.0, 4.0}[i];
        const auto [a0, a1] = slit_angles(suite[i].hull);
        const double target = angle_from_alpha(alpha);
        const double err = std::max(std::abs(a0 - target), std::abs(kPi - a1 - target));
        r.pass = r.pass && err <= kWedgeTol;
        sum << (i ? "; " : "") << "alpha=" << fmt(alpha) << " theta=" << fmt(a0, 5) << " target " << fmt(target, 5);

        const auto [h0, h1] = slit_angles(trace_hull(two_slit_path(alpha, 0.5), trace_config()));
        const double err_half = std::max(std::abs(h0 - target), std::abs(kPi - h1 - target));
        worst_half = std::max(worst_half, err_half);
        const double unit_law = kPi / (2.0 + alpha / 2.0);
        worst_unit_law = std::max(worst_unit_law, std::max(std::abs(a0 - unit_law), std::abs(kPi - a1 - unit_law)));
        rows.push_back({{"alpha", alpha},
                        {"theta_right", a0},
                        {"theta_left", kPi - a1},
                        {"target", target},
                        {"error", err},
                        {"half_mass_error", err_half},
                        {"unit_mass_law", unit_law}});
    }
    r.summary = sum.str() + " (tol " + fmt(kWedgeTol) + ")";
    r.diagnostics.push_back("unit-mass atoms follow theta = pi/(2 + alpha/2): max deviation " + fmt(worst_unit_law, 3));
    r.diagnostics.push_back("atoms of mass 1/2 follow theta = pi/(alpha + 2): max deviation " + fmt(worst_half, 3));
    r.data = {{"rows", rows}};
    return r;
}

CriterionResult balanced_case(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "balanced-case constants";
    const auto& suite = geometry_suite(o.seed);
    const auto [a0, a1] = slit_angles(suite[4].hull);
    const double err = std::max(std::abs(a0 - kPi / 4.0), std::abs(a1 - 3.0 * kPi / 4.0));
    r.pass = err <= kWedgeTol;
    const double c = balanced_constants(kPi / 4.0).second;
    r.summary = "drivers +/-" + fmt(c, 8) + " sqrt(t): angles (" + fmt(a0, 5) + ", " + fmt(a1, 5) +
                ") vs (pi/4, 3pi/4), error " + fmt(err, 3) + " (tol " + fmt(kWedgeTol) + ")";

    // Discrepancy report between the two candidate constants.
    const WedgeSpec w = wedge_constants(kPi / 4.0, 3.0 * kPi / 4.0);
    const auto measure = [&](double c1, double c2) {
        const auto [m0, m1] = slit_angles(trace_hull(wedge_path(c1, c2, 1.0), trace_config()));
        return std::pair{std::pair{m0, m1}, std::max(std::abs(m0 - kPi / 4.0), std::abs(m1 - 3.0 * kPi / 4.0))};
    };
    const auto [raw_angles, raw_err] = measure(w.zeta1, w.zeta2);
    const auto [scaled_angles, scaled_err] = measure(w.zeta1_scaled, w.zeta2_scaled);
    const bool raw_wins = raw_err < scaled_err;
    r.diagnostics.push_back("constants psi1 -/+ psi2 = (" + fmt(w.zeta1, 10) + ", " + fmt(w.zeta2, 10) +
                            "): hull angles (" + fmt(raw_angles.first, 5) + ", " + fmt(raw_angles.second, 5) +
                            "), error " + fmt(raw_err, 3));
    r.diagnostics.push_back("constants (psi1 -/+ psi2)/sqrt2 = (" + fmt(w.zeta1_scaled, 10) + ", " +
                            fmt(w.zeta2_scaled, 10) + "): hull angles (" + fmt(scaled_angles.first, 5) + ", " +
                            fmt(scaled_angles.second, 5) + "), error " + fmt(scaled_err, 3));
    r.diagnostics.push_back(std::string("hull-measured winner: ") +
                            (raw_wins ? "psi1 -/+ psi2" : "(psi1 -/+ psi2)/sqrt2") +
                            "; the balanced closed form equals the scaled pair");
    const auto [h0, h1] = slit_angles(trace_hull(wedge_path(-c, c, 0.5), trace_config()));
    r.diagnostics.push_back("balanced drivers with atoms of mass 1/2: angles (" + fmt(h0, 5) + ", " + fmt(h1, 5) + ")");
    r.data = {{"angles", {a0, a1}},
              {"error", err},
              {"balanced_c", c},
              {"raw", {{"zeta", {w.zeta1, w.zeta2}}, {"angles", {raw_angles.first, raw_angles.second}}, {"error", raw_err}}},
              {"scaled",
               {{"zeta", {w.zeta1_scaled, w.zeta2_scaled}},
                {"angles", {scaled_angles.first, scaled_angles.second}},
                {"error", scaled_err}}},
              {"winner", raw_wins ? "raw" : "scaled"}};
    return r;
}

struct TreeAngleCheck {
    double worst = 0.0;
    std::vector<std::vector<double>> gaps;
};

TreeAngleCheck tree_angles(const TracedHull& hull) {
    TreeAngleCheck c;
    for (const auto& b : hull.branch_images) {
        const std::vector<double> g = branch_vertex_angles(hull, b.vertex);
        for (double x : g) c.worst = std::max(c.worst, std::abs(x - 2.0 * kPi / 3.0));
        c.gaps.push_back(g);
    }
    return c;
}

CriterionResult tree_embedding(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "tree embedding";
    const auto& suite = geometry_suite(o.seed);
    const TracedHull& hull = suite[5].hull;
    const EmbeddingReport emb = verify_embedding(hull);
    const TreeAngleCheck ang = tree_angles(hull);
    r.pass = emb.pass && !ang.gaps.empty() && ang.worst <= kTreeAngleTol;
    std::ostringstream os;
    os << "embedding " << (emb.pass ? "ok" : "broken") << " (min separation " << fmt(emb.min_separation, 3) << "), "
       << ang.gaps.size() << " interior vertices, max |gap - 2pi/3| " << fmt(ang.worst, 3) << " (tol "
       << fmt(kTreeAngleTol) << ")";
    r.summary = os.str();
    for (std::size_t i = 0; i < ang.gaps.size(); ++i) {
        r.diagnostics.push_back("vertex " + std::to_string(hull.branch_images[i].vertex) + " gaps (" +
                                fmt(ang.gaps[i][0], 5) + ", " + fmt(ang.gaps[i][1], 5) + ", " +
                                fmt(ang.gaps[i][2], 5) + ")");
    }
    const MarkedPlaneTree tree = embedding_tree(o.seed);
    const TracedHull half = trace_hull(tree_path(tree, 0.5), trace_config());
    const TreeAngleCheck hc = tree_angles(half);
    r.diagnostics.push_back("atoms of mass 1/2: embedding " + std::string(verify_embedding(half).pass ? "ok" : "broken") +
                            ", max |gap - 2pi/3| " + fmt(hc.worst, 3));
    r.data = {{"embedding", to_json(emb)}, {"gaps", ang.gaps}, {"worst", ang.worst}, {"half_mass_worst", hc.worst}};
    return r;
}

CriterionResult capacity(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "capacity identity";
    r.pass = true;
    double worst = 0.0;
    std::size_t checks = 0;
    for (const auto& s : geometry_suite(o.seed)) {
        for (const auto& [t, b] : s.hull.capacity_trace) {
            const double rel = std::abs(b - s.path.integrated_mass(t)) / (1.0 + b);
            worst = std::max(worst, rel);
            ++checks;
            if (rel > kCapacityRel) {
                r.pass = false;
                r.diagnostics.push_back(s.name + " at t=" + fmt(t) + ": b=" + fmt(b, 12) + " vs " +
                                        fmt(s.path.integrated_mass(t), 12));
            }
        }
    }
    r.pass = r.pass && checks > 0;
    r.summary = std::to_string(checks) + " samples on " + std::to_string(geometry_suite(o.seed).size()) +
                " paths, max |b - int N|/(1+b) " + fmt(worst, 3) + " (tol " + fmt(kCapacityRel) + ")";
    r.data = {{"checks", checks}, {"worst", worst}};
    return r;
}

CriterionResult round_trip(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "forward/reverse round trip";
    r.pass = true;
    const SolverConfig cfg = trace_config();
    double worst = 0.0;
    std::size_t probes = 0;
    Engine eng = make_engine(stage_key(o.seed, "round-trip"));
    for (const auto& s : geometry_suite(o.seed)) {
        const double t = s.path.end_time;
        double lo = 0.0;
        double hi = 0.0;
        for (const auto& seg : s.path.segments) {
            for (double x : seg.positions) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        for (std::size_t i = 0; i < kRoundTripProbes; ++i) {
            const double re = lo - 1.0 + (hi - lo + 2.0) * uniform_open(eng);
            const double im = 0.1 + 9.9 * uniform_open(eng);
            const Complex w(re, im);
            const Complex z = reverse_map(s.path, t, w, cfg);
            const ForwardResult f = forward_map(s.path, t, z, cfg);
            const double dev = f.swallowed_at ? std::numeric_limits<double>::infinity() : std::abs(f.value - w);
            worst = std::max(worst, dev);
            ++probes;
            if (!(dev <= kRoundTripTol)) r.pass = false;
        }
    }
    r.summary = std::to_string(probes) + " probes, max |g(h(w)) - w| " + fmt(worst, 3) + " (tol " +
                fmt(kRoundTripTol) + ")";
    r.data = {{"probes", probes}, {"worst", worst}};
    return r;
}

CriterionResult semicircle(const AcceptanceOptions&) {
    CriterionResult r;
    r.title = "semicircle and Burgers oracle";
    constexpr std::size_t kN = 200;
    std::vector<Vertex> vs(kN);
    for (std::size_t i = 0; i < kN; ++i) {
        vs[i].lifetime = 10.0 + 1e-3 * static_cast<double>(i);
        vs[i].death = vs[i].lifetime;
    }
    const MarkedForest forest = MarkedForest::from_vertices(std::move(vs));
    FlowConfig fc;
    fc.horizon = 1.0;
    const std::vector<double> x0(kN, 0.0);
    const DrivingPath path = coulomb_flow(forest, AlphaSchedule::constant(1.0 / kN), x0, fc);
    const EmpiricalMeasureSeries series = empirical_series(path, kN, 1.0 / kN, 1.0, false);
    const AtomicMeasure& last = series.measures.back();
    const double ks = semicircle_ks(last);
    const double res = std::abs(burgers_residual(series, {0.0, 2.0}, 1.0));
    double edge = 0.0;
    for (const Atom& a : last.atoms) edge = std::max(edge, std::abs(a.position));
    r.pass = series.times.back() == 1.0 && ks <= kSemicircleKs && res <= kBurgersTol;
    r.summary = "KS to semicircle " + fmt(ks, 4) + " (tol " + fmt(kSemicircleKs) + "), |Burgers residual at 2i| " +
                fmt(res, 3) + " (tol " + fmt(kBurgersTol) + ")";
    r.diagnostics.push_back("max |x| at t=1: " + fmt(edge, 6));
    r.data = {{"ks", ks}, {"burgers_residual", res}, {"edge", edge}};
    return r;
}

McConfig martingale_config(const AcceptanceOptions& o) {
    McConfig c;
    c.replicas = scaled(10'000, o.replica_scale);
    c.seed = o.seed;
    c.jobs = o.jobs;
    c.phis = {TestFunction::bump(0.0, 0.5)};
    for (const auto& f : TestFunction::parse("stieltjes:0,1")) c.phis.push_back(f);
    return c;
}

const MartingaleReport& martingale_run(const AcceptanceOptions& o) {
    static std::map<std::string, std::unique_ptr<MartingaleReport>> cache;
    const std::string key = std::to_string(o.seed) + "/" + fmt(o.replica_scale);
    auto& slot = cache[key];
    if (!slot) slot = std::make_unique<MartingaleReport>(mc_martingale_test(martingale_config(o)));
    return *slot;
}

CriterionResult martingale(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "unconditioned martingale problem";
    const MartingaleReport& rep = martingale_run(o);
    bool ok = rep.sufficient;
    double worst_mean = 0.0;
    double worst_qv = 0.0;
    for (const auto& s : rep.stats) {
        ok = ok && s.pass;
        worst_mean = std::max(worst_mean, std::abs(s.z_mean));
        worst_qv = std::max(worst_qv, std::abs(s.z_qv));
        r.diagnostics.push_back(s.phi + " t=" + fmt(s.t) + ": mean " + fmt(s.mean, 4) + " +/- " + fmt(s.se, 3) +
                                ", M^2 " + fmt(s.m2, 5) + " vs QV " + fmt(s.qv_pred, 5));
    }
    r.pass = ok;
    r.summary = std::to_string(rep.replicas) + " replicas, " + std::to_string(rep.stats.size()) +
                " statistics, max |z| mean " + fmt(worst_mean, 3) + ", second moment " + fmt(worst_qv, 3) +
                " (critical " + fmt(rep.z_crit, 4) + ")";
    r.data = to_json(rep);
    return r;
}

CriterionResult feller(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "total-mass Feller scaling";
    const MartingaleReport& rep = martingale_run(o);
    r.pass = rep.sufficient && !rep.mass.empty();
    std::ostringstream os;
    for (const auto& m : rep.mass) {
        r.pass = r.pass && m.mean_pass && m.variance_pass;
        os << (os.tellp() > 0 ? "; " : "") << "t=" << fmt(m.t) << " mean " << fmt(m.mean, 5) << " +/- "
           << fmt(m.se, 3) << ", variance " << fmt(m.variance, 4) << " +/- " << fmt(m.variance_se, 3) << " vs "
           << fmt(m.variance_target, 4);
    }
    r.summary = os.str();
    r.data = to_json(rep)["mass"];
    return r;
}

CriterionResult offspring(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "conditioned offspring law";
    const OffspringReport rep =
        offspring_test(101, scaled(5'000, o.replica_scale), 0.0, replica_seed(o.seed, "offspring", 0), 30, 0.0027,
                       o.jobs);
    std::size_t over3 = 0;
    for (const auto& b : rep.bins) over3 += std::abs(b.z) > 3.0 ? 1 : 0;
    r.pass = rep.pass;
    r.summary = std::to_string(rep.tested) + " bins with >= " + std::to_string(rep.min_count) + " deaths, " +
                std::to_string(rep.failed) + " outside the band, max |z| " + fmt(rep.max_abs_z, 3) + " (critical " +
                fmt(rep.z_crit, 4) + ")";
    r.diagnostics.push_back(std::to_string(over3) + " bins exceed |z| = 3 before multiplicity correction");
    r.data = to_json(rep);
    return r;
}

CriterionResult conditioned(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "conditioned martingale problem";
    ConditionedMcConfig c;
    c.replicas = scaled(5'000, o.replica_scale);
    c.seed = replica_seed(o.seed, "conditioned", 0);
    c.jobs = o.jobs;
    c.phis = {TestFunction::bump(0.0, 0.5)};
    const ConditionedReport rep = conditioned_mc(c);
    bool mean_ok = true;
    bool qv_ok = true;
    for (std::size_t i = 0; i < rep.stats.size(); ++i) {
        const auto& s = rep.stats[i];
        mean_ok = mean_ok && s.mean_pass;
        qv_ok = qv_ok && s.qv_pass;
        r.diagnostics.push_back(s.phi + " t=" + fmt(s.t, 4) + ": mean " + fmt(s.mean, 4) + " +/- " + fmt(s.se, 3) +
                                ", M^2 " + fmt(s.m2, 5) + " vs QV " + fmt(s.qv_pred, 5) + " (ratio " +
                                fmt(rep.qv_ratio[i], 4) + ", z " + fmt(s.z_qv, 3) + ")");
    }
    r.pass = rep.pass;
    r.summary = std::to_string(rep.replicas) + " replicas, sigma 0.2-quantile " + fmt(rep.sigma_q, 4) + ": mean " +
                (mean_ok ? "ok" : "off") + ", second moment " + (qv_ok ? "ok" : "off") + " (critical " +
                fmt(rep.z_crit, 4) + ")";
    c.options.drift = ConditionedDrift::exact_q;
    const ConditionedReport exact = conditioned_mc(c);
    bool exact_mean = true;
    for (const auto& s : exact.stats) exact_mean = exact_mean && s.mean_pass;
    r.diagnostics.push_back(std::string("drift from the exact offspring probability: mean ") +
                            (exact_mean ? "ok" : "off"));
    r.data = to_json(rep);
    return r;
}

CriterionResult sup_law(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "sup-local-time law";
    const std::size_t replicas = std::max<std::size_t>(1000, scaled(2'000, o.replica_scale));
    const SupMassReport rep =
        sup_mass_test(sup_local_time_samples(401, replicas, 0.0, replica_seed(o.seed, "sup", 0), o.jobs), kSupKs);
    r.pass = rep.pass;
    r.summary = std::to_string(rep.replicas) + " replicas, KS to 4 sup|bridge| " + fmt(rep.ks_distance, 4) +
                " (tol " + fmt(kSupKs) + ")";
    r.diagnostics.push_back("KS to 2 sup(excursion): " + fmt(rep.ks_excursion, 4));
    r.diagnostics.push_back("median " + fmt(rep.median_empirical, 4) + " vs 4 sup|bridge| median " +
                            fmt(rep.median_theory, 4));
    r.data = to_json(rep);
    return r;
}

// Emits a small set of artifacts into `dir`.
void emit_artifacts(const fs::path& dir, std::uint64_t seed, unsigned jobs) {
    const MarkedForest forest = sample_gw_forest(3, 1.0, replica_seed(seed, "determinism", 0));
    write_tree(dir / "tree.json", forest, {seed, 1.0, 0});
    FlowConfig fc;
    fc.horizon = 2.0;
    fc.dt_max = 1e-3;
    const std::vector<double> x0{-1.0, 0.0, 1.0};
    const DrivingPath path =
        dyson_flow(forest, AlphaSchedule::constant(0.5), Beta(4.0), x0, fc, replica_seed(seed, "determinism", 1));
    write_path(dir / "path", path);
    write_path(dir / "path_reread", read_path(dir / "path"));
    SolverConfig sc;
    sc.dt = 1e-3;
    write_hull_csv(dir / "hull.csv", trace_hull(path, sc));
    McConfig mc;
    mc.n = 20;
    mc.replicas = 40;
    mc.seed = seed;
    mc.jobs = jobs;
    mc.keep_samples = true;
    mc.phis = {TestFunction::bump(0.0, 0.5)};
    const MartingaleReport rep = mc_martingale_test(mc);
    write_json(dir / "mc.json", to_json(rep));
    write_samples_csv(dir / "mc_samples.csv", rep, mc);
}

CriterionResult determinism(const AcceptanceOptions& o) {
    CriterionResult r;
    r.title = "determinism";
    const fs::path root = fs::temp_directory_path() / ("bloewner-determinism-" + std::to_string(::getpid()));
    fs::remove_all(root);
    emit_artifacts(root / "a", o.seed, 1);
    emit_artifacts(root / "b", o.seed, std::max(2u, o.jobs));
    std::size_t compared = 0;
    std::size_t differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        const fs::path other = root / "b" / entry.path().filename();
        ++compared;
        if (!fs::exists(other) || read_text(entry.path()) != read_text(other)) {
            ++differing;
            r.diagnostics.push_back("differs: " + entry.path().filename().string());
        }
    }
    const auto sidecar = [&](const char* name) {
        Json j = Json::parse(read_text(root / "a" / name));
        j.erase("csv");
        return j.dump();
    };
    const bool reread_same = read_text(root / "a" / "path.csv") == read_text(root / "a" / "path_reread.csv") &&
                             sidecar("path.json") == sidecar("path_reread.json");
    r.pass = compared > 0 && differing == 0 && reread_same;
    r.summary = std::to_string(compared) + " artifacts from two runs (jobs 1 and " +
                std::to_string(std::max(2u, o.jobs)) + "), " + std::to_string(differing) +
                " differ; path re-read " + (reread_same ? "identical" : "differs");
    fs::remove_all(root);
    r.data = {{"compared", compared}, {"differing", differing}};
    return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
    using Fn = CriterionResult (*)(const AcceptanceOptions&);
    static const Fn table[kCriterionCount] = {two_particle, wedge_angles, balanced_case, tree_embedding, capacity,
                                              round_trip,   semicircle,   martingale,    feller,         offspring,
                                              conditioned,  sup_law,      determinism};
    if (id < 1 || id > kCriterionCount) throw InvalidArgument("criterion id must be in 1.." + std::to_string(kCriterionCount));
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r = table[id - 1](options);
    r.id = id;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string result_line(const CriterionResult& r) {
    return "criterion " + std::to_string(r.id) + " (" + r.title + "): " + (r.pass ? "PASS" : "FAIL") + "  " +
           r.summary;
}

}  // namespace bloewner
