#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "gcnc/config.hpp"

namespace gcnc {

enum class Command { train, sweep, transfer, estimate_gc, bounds, verify };

std::string_view to_string(Command c);
Command command_from_string(std::string_view name);

/// Process exit statuses of the command-line tool.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config_error = 2;
inline constexpr int divergence = 3;
inline constexpr int verification_failed = 4;
}  // namespace exit_code

/// Train/test split of the source classes plus the optional target pool.
struct ExperimentData {
    LabeledDataset train;
    LabeledDataset test;
    std::optional<LabeledDataset> target;
};

ExperimentData build_data(const DatasetConfig& cfg);

struct CommandOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
};

/// Applies --out / --seed overrides: the seed replaces train.seed and the
/// sweep seed list.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& opts);

/// Runs one command and returns its exit status. Progress and summaries go
/// to `log`; result files go to the output directory.
int run_command(const ExperimentConfig& cfg, Command command, const CommandOptions& opts,
                std::ostream& log);

}  // namespace gcnc
