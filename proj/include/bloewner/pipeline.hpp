#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "bloewner/errors.hpp"
#include "bloewner/io.hpp"

namespace bloewner {

inline constexpr const char* kToolVersion = "1.0.0";

/// Collected schema violations, reported together.
class ConfigError : public InvalidArgument {
  public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

  private:
    std::vector<std::string> problems_;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    std::vector<std::string> stages{"tree", "drive", "hull", "verify"};

    // [tree]
    std::size_t initial = 1;
    double rate = 1.0;
    std::size_t conditioned_n = 0;
    double tree_horizon = std::numeric_limits<double>::infinity();

    // [driver]
    std::string mode = "coulomb";
    double alpha = 1.0;
    double angle = 0.0;  // > 0 selects the angle schedule theta = angle for every vertex
    Beta beta = Beta::infinite();
    double dt = 1e-3;
    double tolerance = 1e-8;
    double horizon = std::numeric_limits<double>::infinity();

    // [loewner]
    double trace_dt = 1e-3;
    double eps = 0.0;

    // [superprocess]
    std::size_t n = 50;
    std::size_t replicas = 1000;
    Beta sp_beta = Beta(8.0);
    std::vector<std::string> phis{"bump:0,0.5"};
    std::vector<double> t_list{0.25, 0.5};
    bool conditioned = false;
    double eps_prime = 0.05;
    unsigned jobs = 1;

    // [output]
    std::filesystem::path dir = "out";
    bool svg = true;
    bool samples = false;

    /// The parsed document, digested into the manifest.
    std::string source;
};

/// Parses an INI document; throws ConfigError listing every problem.
PipelineConfig parse_config(const std::string& text);

/// True when the document has no keys at all.
bool config_is_empty(const std::string& text);

Json config_to_json(const PipelineConfig& config);

std::string sha256_hex(const std::string& bytes);

struct StageOutcome {
    std::string stage;
    bool pass = true;
    std::string message;
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    Json config;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;   // file, sha256
    std::vector<std::pair<std::string, std::string>> outputs;  // file, sha256
    Json counts;
    double wall_clock_seconds = 0.0;
    std::vector<StageOutcome> stages;
};

Json to_json(const RunManifest& m);

/// Runs the configured stages into config.dir and writes manifest.json.
/// Returns the exit code: 0 pass, 1 a verification or statistical test failed.
/// Usage and numerical errors propagate as exceptions.
int run_pipeline(const PipelineConfig& config, std::ostream& log);

/// Exit code for an exception escaping a stage.
int exit_code_for(const std::exception& e);

}  // namespace bloewner
