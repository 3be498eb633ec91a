#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bloewner/io.hpp"

namespace bloewner {

struct AcceptanceOptions {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    /// Scales every replica count (1 = full size); values below 1 give quick smoke runs.
    double replica_scale = 1.0;
};

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string summary;
    std::vector<std::string> diagnostics;
    Json data;
    double seconds = 0.0;
};

inline constexpr int kCriterionCount = 13;

/// Runs one acceptance criterion (1..13).
CriterionResult run_criterion(int id, const AcceptanceOptions& options = {});

/// "criterion N (title): PASS|FAIL  summary".
std::string result_line(const CriterionResult& r);

}  // namespace bloewner
