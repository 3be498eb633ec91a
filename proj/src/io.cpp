#include "bloewner/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "bloewner/errors.hpp"

namespace bloewner {

namespace fs = std::filesystem;

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::string format_digits(double x, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

Json beta_json(const Beta& b) { return b.is_infinite() ? Json("inf") : Json(b.value()); }

Beta beta_from_json(const Json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return Beta::infinite();
    return Beta(j.get<double>());
}

}  // namespace

// ---------------------------------------------------------------------------
// Trees.

Json tree_to_json(const MarkedForest& forest, const TreeMeta& meta) {
    Json doc;
    doc["seed"] = meta.seed;
    doc["rate"] = meta.rate;
    doc["conditioned_n"] = meta.conditioned_n;
    doc["roots"] = forest.roots();
    Json vs = Json::array();
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const Vertex& v = forest.vertex(static_cast<VertexId>(i));
        Json jv;
        jv["id"] = i;
        jv["parent"] = v.parent ? Json(*v.parent) : Json(nullptr);
        jv["children"] = v.children;
        jv["birth"] = v.birth;
        jv["lifetime"] = v.lifetime;
        jv["death"] = v.death;
        vs.push_back(std::move(jv));
    }
    doc["vertices"] = std::move(vs);
    return doc;
}

MarkedForest tree_from_json(const Json& doc, TreeMeta* meta) {
    try {
        if (meta) {
            meta->seed = doc.value("seed", std::uint64_t{0});
            meta->rate = doc.value("rate", 0.0);
            meta->conditioned_n = doc.value("conditioned_n", std::size_t{0});
        }
        const Json& vs = doc.at("vertices");
        std::vector<Vertex> vertices(vs.size());
        for (const Json& jv : vs) {
            const auto id = jv.at("id").get<std::size_t>();
            if (id >= vertices.size()) throw InvalidArgument("vertex id " + std::to_string(id) + " out of range");
            Vertex& v = vertices[id];
            if (!jv.at("parent").is_null()) v.parent = jv.at("parent").get<VertexId>();
            v.children = jv.at("children").get<std::vector<VertexId>>();
            v.birth = jv.at("birth").get<double>();
            v.lifetime = jv.at("lifetime").get<double>();
            v.death = jv.at("death").get<double>();
        }
        return MarkedForest::from_vertices(std::move(vertices));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed tree document: ") + e.what());
    }
}

void write_tree(const fs::path& file, const MarkedForest& forest, const TreeMeta& meta) {
    write_json(file, tree_to_json(forest, meta));
}

MarkedForest read_tree(const fs::path& file, TreeMeta* meta) {
    try {
        return tree_from_json(Json::parse(read_text(file)), meta);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("cannot parse tree file " + file.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Driving paths.

void write_path(const fs::path& prefix, const DrivingPath& path) {
    std::ostringstream csv;
    csv << "t_time,vertex_id,position_length\n";
    Json segs = Json::array();
    for (const auto& seg : path.segments) {
        for (std::size_t k = 0; k < seg.rows(); ++k) {
            const auto row = seg.row(k);
            for (std::size_t j = 0; j < seg.width(); ++j) {
                csv << format_double(seg.times[k]) << ',' << seg.alive[j] << ',' << format_double(row[j]) << '\n';
            }
        }
        Json js;
        js["t_begin"] = seg.t_begin;
        js["t_end"] = seg.t_end;
        js["alpha"] = seg.alpha;
        js["alive"] = seg.alive;
        js["rows"] = seg.rows();
        segs.push_back(std::move(js));
    }
    Json events = Json::array();
    for (const auto& ev : path.events) {
        events.push_back({{"time", ev.time},
                          {"kind", ev.kind == EventKind::branch ? "branch" : "death"},
                          {"vertex", ev.vertex},
                          {"position", ev.position}});
    }
    Json side;
    side["csv"] = prefix.filename().string() + ".csv";
    side["beta"] = beta_json(path.beta);
    side["alpha"] = {{"breakpoints", path.alpha.breakpoints()}, {"values", path.alpha.values()}};
    side["mass_per_atom"] = path.mass_per_atom;
    side["seed"] = path.seed;
    side["dt_max"] = path.dt_max;
    side["end_time"] = path.end_time;
    side["extinct"] = path.extinct;
    side["segments"] = std::move(segs);
    side["events"] = std::move(events);
    write_text(fs::path(prefix.string() + ".csv"), csv.str());
    write_json(fs::path(prefix.string() + ".json"), side);
}

DrivingPath read_path(const fs::path& prefix) {
    const fs::path side_file(prefix.string() + ".json");
    const fs::path csv_file(prefix.string() + ".csv");
    Json side;
    try {
        side = Json::parse(read_text(side_file));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("cannot parse " + side_file.string() + ": " + e.what());
    }
    std::istringstream csv(read_text(csv_file));
    std::string line;
    std::getline(csv, line);  // header
    DrivingPath path;
    try {
        path.beta = beta_from_json(side.at("beta"));
        path.alpha = AlphaSchedule(side.at("alpha").at("breakpoints").get<std::vector<double>>(),
                                   side.at("alpha").at("values").get<std::vector<double>>());
        path.mass_per_atom = side.at("mass_per_atom").get<double>();
        path.seed = side.at("seed").get<std::uint64_t>();
        path.dt_max = side.at("dt_max").get<double>();
        path.end_time = side.at("end_time").get<double>();
        path.extinct = side.at("extinct").get<bool>();
        for (const Json& ev : side.at("events")) {
            PathEvent e{};
            e.time = ev.at("time").get<double>();
            e.kind = ev.at("kind").get<std::string>() == "branch" ? EventKind::branch : EventKind::death;
            e.vertex = ev.at("vertex").get<VertexId>();
            e.position = ev.at("position").get<double>();
            path.events.push_back(e);
        }
        std::size_t line_no = 1;
        for (const Json& js : side.at("segments")) {
            PathSegment seg;
            seg.t_begin = js.at("t_begin").get<double>();
            seg.t_end = js.at("t_end").get<double>();
            seg.alpha = js.at("alpha").get<double>();
            seg.alive = js.at("alive").get<std::vector<VertexId>>();
            const auto rows = js.at("rows").get<std::size_t>();
            for (std::size_t k = 0; k < rows; ++k) {
                for (std::size_t j = 0; j < seg.width(); ++j) {
                    ++line_no;
                    if (!std::getline(csv, line)) {
                        throw InvalidArgument(csv_file.string() + " ends early at line " + std::to_string(line_no));
                    }
                    std::istringstream ls(line);
                    std::string t_txt;
                    std::string v_txt;
                    std::string x_txt;
                    std::getline(ls, t_txt, ',');
                    std::getline(ls, v_txt, ',');
                    std::getline(ls, x_txt, ',');
                    const double t = std::stod(t_txt);
                    if (std::stoul(v_txt) != seg.alive[j]) {
                        throw InvalidArgument(csv_file.string() + " line " + std::to_string(line_no) +
                                              ": vertex does not match the sidecar");
                    }
                    if (j == 0) seg.times.push_back(t);
                    seg.positions.push_back(std::stod(x_txt));
                }
            }
            path.segments.push_back(std::move(seg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("malformed path sidecar " + side_file.string() + ": " + e.what());
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const InvalidArgument*>(&e)) throw;
        throw InvalidArgument("malformed path CSV " + csv_file.string() + ": " + e.what());
    }
    return path;
}

// ---------------------------------------------------------------------------
// Hulls.

void write_hull_csv(const fs::path& file, const TracedHull& hull) {
    std::ostringstream os;
    os << "t_time,vertex_id,re_length,im_length\n";
    for (const auto& c : hull.curves) {
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            os << format_double(c.times[i]) << ',' << c.vertex << ',' << format_double(c.points[i].real()) << ','
               << format_double(c.points[i].imag()) << '\n';
        }
    }
    write_text(file, os.str());
}

std::string emit_svg(const TracedHull& hull, const SvgStyle& style) {
    double xmin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;
    bool any = false;
    for (const auto& c : hull.curves) {
        for (const Complex& p : c.points) {
            if (!any) {
                xmin = xmax = p.real();
                any = true;
            }
            xmin = std::min(xmin, p.real());
            xmax = std::max(xmax, p.real());
            ymax = std::max(ymax, p.imag());
        }
    }
    const double span_x = std::max(xmax - xmin, 1e-12);
    const double span_y = std::max(ymax, 1e-12);
    const double scale = std::min((style.width - 2 * style.margin) / span_x, (style.height - 2 * style.margin) / span_y);
    const double tx = style.margin - scale * xmin;
    const double ty = style.height - style.margin;

    // Color each curve by the subtree below the root it belongs to.
    std::map<VertexId, const HullCurve*> by_vertex;
    for (const auto& c : hull.curves) by_vertex[c.vertex] = &c;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                    "#17becf"};
    const auto color_of = [&](const HullCurve& c) -> std::string {
        VertexId v = c.vertex;
        std::optional<VertexId> parent = c.parent;
        if (!parent) return "#000000";
        while (true) {
            const auto it = by_vertex.find(*parent);
            if (it == by_vertex.end() || !it->second->parent) break;
            v = *parent;
            parent = it->second->parent;
        }
        return palette[v % (sizeof palette / sizeof *palette)];
    };

    const int d = style.digits;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_digits(style.width, 10) << "\" height=\""
       << format_digits(style.height, 10) << "\">\n";
    os << "<g transform=\"translate(" << format_digits(tx, 12) << ',' << format_digits(ty, 12) << ") scale("
       << format_digits(scale, 12) << ',' << format_digits(-scale, 12) << ")\">\n";
    os << "<line class=\"axis\" x1=\"" << format_digits(xmin - 0.05 * span_x, d) << "\" y1=\"0\" x2=\""
       << format_digits(xmax + 0.05 * span_x, d)
       << "\" y2=\"0\" stroke=\"#888888\" vector-effect=\"non-scaling-stroke\"/>\n";
    for (const auto& c : hull.curves) {
        os << "<polyline data-vertex=\"" << c.vertex << "\" fill=\"none\" stroke=\"" << color_of(c)
           << "\" stroke-width=\"" << format_digits(style.stroke, 6)
           << "\" vector-effect=\"non-scaling-stroke\" points=\"";
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            if (i) os << ' ';
            os << format_digits(c.points[i].real(), d) << ',' << format_digits(c.points[i].imag(), d);
        }
        os << "\"/>\n";
    }
    const double r = 3.0 / scale;
    for (const auto& b : hull.branch_images) {
        os << "<circle class=\"branch\" data-vertex=\"" << b.vertex << "\" cx=\"" << format_digits(b.point.real(), d)
           << "\" cy=\"" << format_digits(b.point.imag(), d) << "\" r=\"" << format_digits(r, 6)
           << "\" fill=\"#000000\"/>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

std::vector<SvgCurve> parse_svg(const std::string& svg) {
    static const std::regex poly(R"re(<polyline data-vertex="(\d+)"[^>]*points="([^"]*)")re");
    std::vector<SvgCurve> out;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
        SvgCurve c;
        c.vertex = static_cast<VertexId>(std::stoul((*it)[1].str()));
        std::istringstream pts((*it)[2].str());
        std::string pair;
        while (pts >> pair) {
            const auto comma = pair.find(',');
            if (comma == std::string::npos) throw InvalidArgument("malformed SVG point '" + pair + "'");
            c.points.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
        }
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports.

Json to_json(const WedgeSpec& w) {
    return {{"theta1", w.theta1}, {"theta2", w.theta2}, {"a", w.a},         {"b", w.b},
            {"x", w.x},           {"psi1", w.psi1},     {"psi2", w.psi2},   {"zeta1", w.zeta1},
            {"zeta2", w.zeta2},   {"zeta1_scaled", w.zeta1_scaled},         {"zeta2_scaled", w.zeta2_scaled}};
}

Json to_json(const EmbeddingReport& r) {
    return {{"pass", r.pass}, {"min_separation", r.min_separation}, {"failures", r.failures}};
}

Json to_json(const GrowthReport& r) {
    return {{"pass", r.pass},
            {"c_t", r.c_t},
            {"worst_ratio", r.worst_ratio},
            {"checked", r.checked},
            {"failures", r.failures}};
}

namespace {

Json stat_json(const StatSummary& s) {
    return {{"phi", s.phi},         {"t", s.t},
            {"mean", s.mean},       {"se", s.se},
            {"ci", {s.ci_low, s.ci_high}},
            {"qv_pred", s.qv_pred}, {"m2", s.m2},
            {"diff_se", s.diff_se}, {"z_mean", s.z_mean},
            {"z_qv", s.z_qv},       {"mean_pass", s.mean_pass},
            {"qv_pass", s.qv_pass}, {"pass", s.pass}};
}

}  // namespace

Json to_json(const MartingaleReport& r) {
    Json doc;
    doc["replicas"] = r.replicas;
    doc["n"] = r.n;
    doc["beta"] = r.beta;
    doc["seed"] = r.seed;
    doc["level"] = r.level;
    doc["z_crit"] = r.z_crit;
    doc["sufficient"] = r.sufficient;
    doc["statistics"] = Json::array();
    for (const auto& s : r.stats) doc["statistics"].push_back(stat_json(s));
    doc["mass"] = Json::array();
    for (const auto& m : r.mass) {
        doc["mass"].push_back({{"t", m.t},
                               {"mass0", m.mass0},
                               {"mean", m.mean},
                               {"se", m.se},
                               {"variance", m.variance},
                               {"variance_se", m.variance_se},
                               {"variance_target", m.variance_target},
                               {"mean_pass", m.mean_pass},
                               {"variance_pass", m.variance_pass}});
    }
    doc["pass"] = r.pass;
    return doc;
}

Json to_json(const ConditionedReport& r) {
    Json doc;
    doc["replicas"] = r.replicas;
    doc["n"] = r.n;
    doc["sigma_quantile_value"] = r.sigma_q;
    doc["t_list"] = r.t_list;
    doc["z_crit"] = r.z_crit;
    doc["statistics"] = Json::array();
    for (std::size_t i = 0; i < r.stats.size(); ++i) {
        Json s = stat_json(r.stats[i]);
        s["m2_over_qv"] = r.qv_ratio[i];
        doc["statistics"].push_back(std::move(s));
    }
    doc["pass"] = r.pass;
    return doc;
}

Json to_json(const OffspringReport& r) {
    Json doc;
    doc["replicas"] = r.replicas;
    doc["n"] = r.n;
    doc["min_count"] = r.min_count;
    doc["z_crit"] = r.z_crit;
    doc["tested"] = r.tested;
    doc["failed"] = r.failed;
    doc["max_abs_z"] = r.max_abs_z;
    doc["bins"] = Json::array();
    for (const auto& b : r.bins) {
        doc["bins"].push_back({{"alive", b.alive},
                               {"remaining", b.remaining},
                               {"deaths", b.deaths},
                               {"branches", b.branches},
                               {"q", b.q},
                               {"z", b.z},
                               {"pass", b.pass}});
    }
    doc["pass"] = r.pass;
    return doc;
}

Json to_json(const SupMassReport& r) {
    return {{"replicas", r.replicas},
            {"ks_distance", r.ks_distance},
            {"ks_excursion", r.ks_excursion},
            {"threshold", r.threshold},
            {"median_empirical", r.median_empirical},
            {"median_theory", r.median_theory},
            {"pass", r.pass}};
}

// ---------------------------------------------------------------------------
// Files.

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream os(file, std::ios::binary);
    if (!os) throw InvalidArgument("cannot open " + file.string() + " for writing");
    os << text;
    if (!os) throw InvalidArgument("failed writing " + file.string());
}

std::string read_text(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_json(const fs::path& file, const Json& doc) { write_text(file, doc.dump(2) + "\n"); }

void write_samples_csv(const fs::path& file, const MartingaleReport& r, const McConfig& config) {
    std::ostringstream os;
    os << "replica";
    for (const auto& phi : config.phis) {
        for (double t : config.t_list) {
            os << ",M_" << phi.label() << "_t" << format_double(t) << ",QV_" << phi.label() << "_t"
               << format_double(t);
        }
    }
    for (double t : config.t_list) os << ",mass_t" << format_double(t);
    os << '\n';
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        os << i;
        for (double v : r.samples[i]) os << ',' << format_double(v);
        os << '\n';
    }
    write_text(file, os.str());
}

}  // namespace bloewner
