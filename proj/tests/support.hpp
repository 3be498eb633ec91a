#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "bloewner/driver.hpp"
#include "bloewner/genealogy.hpp"

namespace test {

/// Forest of `count` childless roots with the given lifetimes.
inline bloewner::MarkedForest roots(const std::vector<double>& lifetimes) {
    std::vector<bloewner::Vertex> vs(lifetimes.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        vs[i].lifetime = lifetimes[i];
        vs[i].death = lifetimes[i];
    }
    return bloewner::MarkedForest::from_vertices(std::move(vs));
}

/// Coulomb flow of unbranching roots started at `x0`, stopped at `horizon`.
inline bloewner::DrivingPath free_particles(const std::vector<double>& x0, double alpha, double horizon,
                                            double dt = 1e-3, double tolerance = 1e-8) {
    std::vector<double> life;
    for (std::size_t i = 0; i < x0.size(); ++i) life.push_back(2.0 * horizon + 0.1 * static_cast<double>(i));
    bloewner::FlowConfig fc;
    fc.dt_max = dt;
    fc.tolerance = tolerance;
    fc.horizon = horizon;
    return bloewner::coulomb_flow(roots(life), bloewner::AlphaSchedule::constant(alpha), x0, fc);
}

inline std::vector<double> positions_at(const bloewner::DrivingPath& path, double t) {
    std::vector<double> out;
    for (const auto& a : path.measure_at(t).atoms) out.push_back(a.position);
    return out;
}

/// Fresh scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("bloewner-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace test
