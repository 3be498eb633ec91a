#include "bloewner/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numbers>
#include <optional>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "bloewner/errors.hpp"

namespace bloewner {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
    return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(text);
    while (std::getline(is, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"", {"seed", "stages"}},
        {"tree", {"initial", "rate", "conditioned_n", "horizon"}},
        {"driver", {"mode", "alpha", "angle", "beta", "dt", "tolerance", "horizon"}},
        {"loewner", {"dt", "eps"}},
        {"superprocess", {"n", "replicas", "beta", "phi", "t", "conditioned", "eps_prime", "jobs"}},
        {"output", {"dir", "svg", "samples"}},
    };
    return s;
}

// Typed reads that record problems instead of throwing.
class Reader {
  public:
    explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

    void real(const std::string& where, const std::string& text, double& out, bool positive, bool allow_inf = false) {
        if (allow_inf && (text == "inf" || text == "infinity")) {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("x");
            if (positive && !(v > 0.0)) {
                problems_.push_back(where + ": must be positive (got " + text + ")");
                return;
            }
            out = v;
        } catch (const std::logic_error&) {
            problems_.push_back(where + ": expected a number (got '" + text + "')");
        }
    }

    template <typename T>
    void count(const std::string& where, const std::string& text, T& out, bool positive) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(text, &used);
            if (used != text.size() || v < 0 || (positive && v == 0)) throw std::invalid_argument("x");
            out = static_cast<T>(v);
        } catch (const std::logic_error&) {
            problems_.push_back(where + ": expected a " + std::string(positive ? "positive" : "nonnegative") +
                                " integer (got '" + text + "')");
        }
    }

    void flag(const std::string& where, const std::string& text, bool& out) {
        if (text == "true" || text == "1" || text == "yes") {
            out = true;
        } else if (text == "false" || text == "0" || text == "no") {
            out = false;
        } else {
            problems_.push_back(where + ": expected true or false (got '" + text + "')");
        }
    }

    void beta(const std::string& where, const std::string& text, Beta& out) {
        if (text == "inf" || text == "infinity") {
            out = Beta::infinite();
            return;
        }
        double v = 0.0;
        const std::size_t before = problems_.size();
        real(where, text, v, true);
        if (problems_.size() != before) return;
        if (v < 1.0) {
            problems_.push_back(where + ": beta must be at least 1 or inf (got " + text + ")");
            return;
        }
        out = Beta(v);
    }

  private:
    std::vector<std::string>& problems_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument("invalid configuration:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

bool config_is_empty(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        if (line[b] == ';' || line[b] == '#' || line[b] == '[') continue;
        return false;
    }
    return true;
}

PipelineConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
    }
    PipelineConfig c;
    c.source = text;
    std::vector<std::string> problems;
    Reader rd(problems);
    const auto& sch = schema();

    for (const auto& [name, node] : tree) {
        const bool is_section = !node.empty();
        if (!is_section) {
            const std::string where = name;
            const std::string v = node.get_value<std::string>();
            if (!sch.at("").count(name)) {
                problems.push_back("unknown top-level key '" + name + "'");
            } else if (name == "seed") {
                rd.count(where, v, c.seed, false);
            } else if (name == "stages") {
                c.stages = split(v, ',');
            }
            continue;
        }
        const auto sec = sch.find(name);
        if (sec == sch.end() || name.empty()) {
            problems.push_back("unknown section [" + name + "]");
            continue;
        }
        for (const auto& [key, leaf] : node) {
            const std::string where = "[" + name + "] " + key;
            const std::string v = leaf.get_value<std::string>();
            if (!sec->second.count(key)) {
                problems.push_back("unknown key " + where);
                continue;
            }
            if (name == "tree") {
                if (key == "initial") rd.count(where, v, c.initial, true);
                if (key == "rate") rd.real(where, v, c.rate, true);
                if (key == "conditioned_n") rd.count(where, v, c.conditioned_n, false);
                if (key == "horizon") rd.real(where, v, c.tree_horizon, true, true);
            } else if (name == "driver") {
                if (key == "mode") c.mode = v;
                if (key == "alpha") rd.real(where, v, c.alpha, true);
                if (key == "angle") rd.real(where, v, c.angle, true);
                if (key == "beta") rd.beta(where, v, c.beta);
                if (key == "dt") rd.real(where, v, c.dt, true);
                if (key == "tolerance") rd.real(where, v, c.tolerance, false);
                if (key == "horizon") rd.real(where, v, c.horizon, true, true);
            } else if (name == "loewner") {
                if (key == "dt") rd.real(where, v, c.trace_dt, true);
                if (key == "eps") rd.real(where, v, c.eps, false);
            } else if (name == "superprocess") {
                if (key == "n") rd.count(where, v, c.n, true);
                if (key == "replicas") rd.count(where, v, c.replicas, true);
                if (key == "beta") rd.beta(where, v, c.sp_beta);
                if (key == "phi") c.phis = split(v, ';');
                if (key == "t") {
                    c.t_list.clear();
                    for (const auto& item : split(v, ',')) {
                        double t = 0.0;
                        rd.real(where, item, t, true);
                        c.t_list.push_back(t);
                    }
                }
                if (key == "conditioned") rd.flag(where, v, c.conditioned);
                if (key == "eps_prime") rd.real(where, v, c.eps_prime, true);
                if (key == "jobs") rd.count(where, v, c.jobs, true);
            } else if (name == "output") {
                if (key == "dir") c.dir = v;
                if (key == "svg") rd.flag(where, v, c.svg);
                if (key == "samples") rd.flag(where, v, c.samples);
            }
        }
    }

    static const std::vector<std::string> order{"tree", "drive", "hull", "verify", "superprocess"};
    for (const auto& s : c.stages) {
        if (std::find(order.begin(), order.end(), s) == order.end()) {
            problems.push_back("stages: unknown stage '" + s + "' (known: " + join(order, ", ") + ")");
        }
    }
    const auto has = [&](const char* s) { return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end(); };
    if (has("drive") && !has("tree")) problems.push_back("stages: 'drive' needs 'tree'");
    if (has("hull") && !has("drive")) problems.push_back("stages: 'hull' needs 'drive'");
    if (has("verify") && !has("hull")) problems.push_back("stages: 'verify' needs 'hull'");
    if (c.mode != "coulomb" && c.mode != "dyson") {
        problems.push_back("[driver] mode: expected coulomb or dyson (got '" + c.mode + "')");
    }
    if (c.mode == "dyson" && c.beta.is_infinite()) problems.push_back("[driver] beta: dyson mode needs a finite beta");
    if (c.angle > 0.0 && !(c.angle < std::numbers::pi / 2)) problems.push_back("[driver] angle: must lie in (0, pi/2)");
    if (c.conditioned_n != 0 && c.conditioned_n % 2 == 0) {
        problems.push_back("[tree] conditioned_n: must be odd (full binary trees have 2L-1 vertices)");
    }
    if (c.conditioned && c.n % 2 == 0) problems.push_back("[superprocess] n: conditioned runs need odd n");
    if (!(c.eps_prime < 1.0)) problems.push_back("[superprocess] eps_prime: must lie in (0, 1)");
    for (const auto& phi : c.phis) {
        try {
            TestFunction::parse(phi);
        } catch (const InvalidArgument& e) {
            problems.push_back(std::string("[superprocess] phi: ") + e.what());
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return c;
}

Json config_to_json(const PipelineConfig& c) {
    const auto beta = [](const Beta& b) { return b.is_infinite() ? Json("inf") : Json(b.value()); };
    const auto real = [](double x) { return std::isinf(x) ? Json("inf") : Json(x); };
    Json j;
    j["seed"] = c.seed;
    j["stages"] = c.stages;
    j["tree"] = {{"initial", c.initial}, {"rate", c.rate}, {"conditioned_n", c.conditioned_n},
                 {"horizon", real(c.tree_horizon)}};
    j["driver"] = {{"mode", c.mode},           {"alpha", c.alpha}, {"angle", c.angle},
                   {"beta", beta(c.beta)},     {"dt", c.dt},       {"tolerance", c.tolerance},
                   {"horizon", real(c.horizon)}};
    j["loewner"] = {{"dt", c.trace_dt}, {"eps", c.eps}};
    j["superprocess"] = {{"n", c.n},
                         {"replicas", c.replicas},
                         {"beta", beta(c.sp_beta)},
                         {"phi", c.phis},
                         {"t", c.t_list},
                         {"conditioned", c.conditioned},
                         {"eps_prime", c.eps_prime},
                         {"jobs", c.jobs}};
    j["output"] = {{"dir", c.dir.string()}, {"svg", c.svg}, {"samples", c.samples}};
    return j;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalFailure("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

Json to_json(const RunManifest& m) {
    Json j;
    j["tool_version"] = m.tool_version;
    j["seed"] = m.seed;
    j["config"] = m.config;
    const auto files = [](const auto& list) {
        Json a = Json::array();
        for (const auto& [f, d] : list) a.push_back({{"file", f}, {"sha256", d}});
        return a;
    };
    j["inputs"] = files(m.inputs);
    j["outputs"] = files(m.outputs);
    j["counts"] = m.counts;
    j["stages"] = Json::array();
    for (const auto& s : m.stages) j["stages"].push_back({{"stage", s.stage}, {"pass", s.pass}, {"message", s.message}});
    j["wall_clock_seconds"] = m.wall_clock_seconds;
    return j;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericalFailure*>(&e) || dynamic_cast<const CapExceeded*>(&e)) return 3;
    if (dynamic_cast<const InvalidArgument*>(&e)) return 2;
    return 3;
}

int run_pipeline(const PipelineConfig& c, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.seed = c.seed;
    m.config = config_to_json(c);
    m.inputs.emplace_back("config", sha256_hex(c.source));
    m.counts = Json::object();
    fs::create_directories(c.dir);
    const auto emitted = [&](const fs::path& file) {
        m.outputs.emplace_back(file.filename().string(), sha256_hex(read_text(file)));
    };
    const auto has = [&](const char* s) { return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end(); };

    std::optional<MarkedForest> forest;
    std::optional<DrivingPath> path;
    std::optional<TracedHull> hull;
    bool all_pass = true;

    const auto stage = [&](const char* name, auto&& body) {
        if (!has(name)) return;
        log << "stage " << name << " ...\n";
        try {
            StageOutcome out = body();
            out.stage = name;
            all_pass = all_pass && out.pass;
            log << "stage " << name << ": " << (out.pass ? "ok" : "FAILED") << (out.message.empty() ? "" : "  ")
                << out.message << "\n";
            m.stages.push_back(std::move(out));
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(std::string("stage ") + name + ": " + e.what());
        } catch (const CapExceeded& e) {
            throw CapExceeded(std::string("stage ") + name + ": " + e.what());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(std::string("stage ") + name + ": " + e.what());
        }
    };

    stage("tree", [&] {
        const std::uint64_t seed = replica_seed(c.seed, "tree", 0);
        TreeMeta meta{seed, c.rate, c.conditioned_n};
        if (c.conditioned_n > 0) {
            forest = sample_conditioned_tree(c.conditioned_n, c.rate, seed).forest();
        } else {
            GwOptions gw;
            gw.horizon = c.tree_horizon;
            forest = sample_gw_forest(c.initial, c.rate, seed, gw);
        }
        write_tree(c.dir / "tree.json", *forest, meta);
        emitted(c.dir / "tree.json");
        m.counts["vertices"] = forest->size();
        return StageOutcome{"", true, std::to_string(forest->size()) + " vertices"};
    });

    stage("drive", [&] {
        const AlphaSchedule alpha = c.angle > 0.0
                                        ? angle_schedule(*forest, std::vector<double>(forest->size(), c.angle))
                                        : AlphaSchedule::constant(c.alpha);
        FlowConfig fc;
        fc.dt_max = c.dt;
        fc.tolerance = c.tolerance;
        fc.horizon = c.horizon;
        const std::vector<double> x0(forest->tree_count(), 0.0);
        path = c.mode == "coulomb" ? coulomb_flow(*forest, alpha, x0, fc)
                                   : dyson_flow(*forest, alpha, c.beta, x0, fc, replica_seed(c.seed, "drive", 0));
        write_path(c.dir / "path", *path);
        emitted(c.dir / "path.csv");
        emitted(c.dir / "path.json");
        std::size_t rows = 0;
        for (const auto& s : path->segments) rows += s.rows();
        m.counts["path_rows"] = rows;
        return StageOutcome{"", true, std::to_string(rows) + " grid rows to t=" + format_double(path->end_time)};
    });

    stage("hull", [&] {
        SolverConfig sc;
        sc.dt = c.trace_dt;
        sc.eps = c.eps;
        hull = trace_hull(*path, sc);
        write_hull_csv(c.dir / "hull.csv", *hull);
        emitted(c.dir / "hull.csv");
        if (c.svg) {
            write_text(c.dir / "hull.svg", emit_svg(*hull));
            emitted(c.dir / "hull.svg");
        }
        m.counts["hull_points"] = hull->point_count();
        return StageOutcome{"", true, std::to_string(hull->point_count()) + " curve points"};
    });

    stage("verify", [&] {
        const EmbeddingReport emb = verify_embedding(*hull);
        double worst = 0.0;
        for (const auto& [t, b] : hull->capacity_trace) {
            worst = std::max(worst, std::abs(b - path->integrated_mass(t)) / (1.0 + b));
        }
        const bool cap_ok = worst <= 1e-6;
        const GrowthReport growth = local_growth_check(*path, *hull, path->end_time);
        Json doc;
        doc["embedding"] = to_json(emb);
        doc["capacity"] = {{"max_relative_error", worst}, {"tolerance", 1e-6}, {"pass", cap_ok}};
        doc["growth"] = to_json(growth);
        write_json(c.dir / "verify.json", doc);
        emitted(c.dir / "verify.json");
        const bool ok = emb.pass && cap_ok && growth.pass;
        return StageOutcome{"", ok,
                            std::string("embedding ") + (emb.pass ? "ok" : "broken") + ", capacity " +
                                (cap_ok ? "ok" : "off") + ", growth " + (growth.pass ? "ok" : "off")};
    });

    stage("superprocess", [&] {
        std::vector<TestFunction> phis;
        for (const auto& p : c.phis) {
            for (auto& f : TestFunction::parse(p)) phis.push_back(f);
        }
        bool ok = false;
        if (c.conditioned) {
            ConditionedMcConfig mc;
            mc.n = c.n;
            mc.replicas = c.replicas;
            mc.beta = c.sp_beta;
            mc.eps_prime = c.eps_prime;
            mc.phis = phis;
            mc.seed = c.seed;
            mc.jobs = c.jobs;
            const ConditionedReport rep = conditioned_mc(mc);
            write_json(c.dir / "superprocess.json", to_json(rep));
            ok = rep.pass;
        } else {
            McConfig mc;
            mc.n = c.n;
            mc.replicas = c.replicas;
            mc.beta = c.sp_beta;
            mc.t_list = c.t_list;
            mc.phis = phis;
            mc.seed = c.seed;
            mc.jobs = c.jobs;
            mc.keep_samples = c.samples;
            const MartingaleReport rep = mc_martingale_test(mc);
            write_json(c.dir / "superprocess.json", to_json(rep));
            if (c.samples) {
                write_samples_csv(c.dir / "superprocess_samples.csv", rep, mc);
                emitted(c.dir / "superprocess_samples.csv");
            }
            ok = rep.pass;
        }
        emitted(c.dir / "superprocess.json");
        m.counts["replicas"] = c.replicas;
        return StageOutcome{"", ok, std::to_string(c.replicas) + " replicas"};
    });

    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(c.dir / "manifest.json", to_json(m));
    return all_pass ? 0 : 1;
}

}  // namespace bloewner
