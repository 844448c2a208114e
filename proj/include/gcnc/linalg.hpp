#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace gcnc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// All randomness in the library flows through this engine; it is
/// seeded explicitly so every run is replayable from its config.
using Rng = std::mt19937_64;

/// Independent seed for a named sub-stream of a run (splitmix64 mixing), so
/// that adding draws to one stream never shifts another.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace gcnc
