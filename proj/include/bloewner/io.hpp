#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bloewner/driver.hpp"
#include "bloewner/genealogy.hpp"
#include "bloewner/loewner.hpp"
#include "bloewner/superproc.hpp"
#include "bloewner/wedge.hpp"

namespace bloewner {

using Json = nlohmann::ordered_json;

/// Formats with 17 significant digits so doubles round-trip exactly.
std::string format_double(double x);

struct TreeMeta {
    std::uint64_t seed = 0;
    double rate = 0.0;
    std::size_t conditioned_n = 0;  // 0 for unconditioned forests
};

Json tree_to_json(const MarkedForest& forest, const TreeMeta& meta);
MarkedForest tree_from_json(const Json& doc, TreeMeta* meta = nullptr);

void write_tree(const std::filesystem::path& file, const MarkedForest& forest, const TreeMeta& meta);
MarkedForest read_tree(const std::filesystem::path& file, TreeMeta* meta = nullptr);

/// Writes PREFIX.csv (t, vertex_id, position per alive vertex and grid row)
/// and PREFIX.json (segments, events, alpha schedule, beta, seed, dt_max).
void write_path(const std::filesystem::path& prefix, const DrivingPath& path);
DrivingPath read_path(const std::filesystem::path& prefix);

/// CSV rows (t, vertex_id, re, im) for every curve point.
void write_hull_csv(const std::filesystem::path& file, const TracedHull& hull);

struct SvgStyle {
    double width = 800.0;
    double height = 600.0;
    double margin = 20.0;
    double stroke = 1.5;
    int digits = 8;  // significant digits of emitted coordinates
};

/// One polyline per genealogy vertex, drawn in model coordinates under a
/// y-flipping group transform; branch images are marked with circles.
std::string emit_svg(const TracedHull& hull, const SvgStyle& style = {});

struct SvgCurve {
    VertexId vertex = 0;
    std::vector<Complex> points;
};

/// Recovers the polylines written by emit_svg.
std::vector<SvgCurve> parse_svg(const std::string& svg);

Json to_json(const WedgeSpec& w);
Json to_json(const EmbeddingReport& r);
Json to_json(const GrowthReport& r);
Json to_json(const MartingaleReport& r);
Json to_json(const ConditionedReport& r);
Json to_json(const OffspringReport& r);
Json to_json(const SupMassReport& r);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const Json& doc);

/// Per-replica samples of a martingale report as CSV.
void write_samples_csv(const std::filesystem::path& file, const MartingaleReport& r, const McConfig& config);

}  // namespace bloewner
