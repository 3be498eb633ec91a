#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace bloewner {

// Random streams are never shared. Every consumer derives its own engine from
// a 64-bit key built by hashing (global seed, stage name, replica, vertex path),
// so results do not depend on traversal or scheduling order.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_key(std::uint64_t key, std::uint64_t value) {
    return splitmix64(key ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

inline constexpr std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t stage_key(std::uint64_t seed, std::string_view stage) {
    return mix_key(splitmix64(seed), hash_name(stage));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t key) { return Engine(splitmix64(key)); }

/// Uniform on the open interval (0, 1), 53 bits.
inline double uniform_open(Engine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(Engine& eng, double rate) { return -std::log(uniform_open(eng)) / rate; }

/// Engine plus a Gaussian sampler; one per particle in the stochastic flows.
struct GaussianStream {
    explicit GaussianStream(std::uint64_t key) : engine(make_engine(key)) {}
    double operator()() { return normal(engine); }

    Engine engine;
    std::normal_distribution<double> normal{0.0, 1.0};
};

}  // namespace bloewner
