#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gcnc/bounds.hpp"
#include "gcnc/data.hpp"
#include "gcnc/train.hpp"

namespace gcnc {

struct DatasetConfig {
    std::string kind = "gaussian_mixture";  // or "idx"
    int k = 5;
    int d = 20;
    double mean_scale = 4.0;
    double sigma = 1.0;
    int m_per_class = 500;
    std::uint64_t seed = 0;
    std::string images;
    std::string labels;
    double test_fraction = 0.2;
    std::vector<int> source_classes;
    std::vector<int> target_classes;
};

struct SweepConfig {
    std::string axis = "lr";  // lr | batch_size | l2 | gc_reg
    std::vector<double> values;
    std::vector<std::uint64_t> seeds{0};
    int max_parallel = 1;
};

struct TransferConfig {
    EpisodeSpec episodes;
    double lambda = -1.0;  // < 0: scale-aware default per episode
};

struct BoundsConfig {
    double c = 0.0;  // <= 0: use the run-max Poincare lower bound
    bool include_lipschitz = false;
    double delta = 0.05;
    int rademacher_trials = 1000;
    double safety = 1.0;  // multiplier on estimated Poincare constants
};

struct EstimateConfig {
    std::string subnet = "embedding";
    int trials = 20;
    int batch = 512;
    std::vector<double> fractions{0.25, 0.5, 1.0};
};

struct OutputConfig {
    std::string dir = "out";
    std::string run_id = "run";
};

/// Fully resolved experiment description. Every key of the flat
/// `section.field = value` file format maps to exactly one field here.
struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
    SweepConfig sweep;
    TransferConfig transfer;
    BoundsConfig bounds;
    EstimateConfig estimate;
    OutputConfig output;
};

/// Parses a flat dotted-key document (`train.lr = 0.01`, `#` comments,
/// lists as `[a, b]`, strings optionally double-quoted). Unknown keys, type
/// mismatches and constraint violations raise ConfigError naming the key.
/// Keys left out take their defaults; network.layer_widths defaults to
/// [d, 64, 32, k_source] for synthetic data and train.log_every to
/// max(1, steps / 100).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in schema order. parse_config of the
/// result reproduces the same config.
std::string format_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace gcnc
