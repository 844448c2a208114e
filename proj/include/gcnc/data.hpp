#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gcnc/linalg.hpp"

namespace gcnc {

/// Rows of X with labels y in [0, k). Every class holds the same number of
/// rows; constructors in this module either guarantee or enforce that.
struct LabeledDataset {
    Matrix X;
    std::vector<int> y;
    int k = 0;

    std::size_t size() const { return y.size(); }
    int dim() const { return static_cast<int>(X.cols()); }

    /// Rows per class (all classes equal once validated).
    std::size_t per_class() const;
    std::vector<std::size_t> class_counts() const;
    /// Row indices of each class in ascending order.
    std::vector<std::vector<std::size_t>> class_indices() const;

    /// Throws ContractError on shape mismatch, out-of-range labels,
    /// non-finite inputs or class imbalance.
    void validate() const;
};

LabeledDataset select_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows);

struct EpisodeSpec {
    int n_way = 5;
    int n_shot = 5;
    int n_query = 15;
    int n_episodes = 100;

    void validate() const;
};

struct ClassSplit {
    std::vector<int> source;
    std::vector<int> target;
};

/// Isotropic Gaussian classes with means on a sphere of radius mean_scale.
struct GaussianMixture {
    Matrix means;  // k x d
    double sigma = 1.0;

    static GaussianMixture random(int k, int d, double mean_scale, double sigma, Rng& rng);

    /// m_per_class draws per class, class-major row order.
    LabeledDataset sample(int m_per_class, Rng& rng) const;
};

LabeledDataset gen_gaussian_mixture(int k, int d, double mean_scale, double sigma, int m_per_class,
                                    std::uint64_t seed);

struct IdxLoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_trimmed = 0;
};

/// Reads an IDX image file (magic 0x00000803) and label file (magic
/// 0x00000801). Pixels are scaled by 1/255. Imbalanced classes are trimmed
/// to the smallest class count, keeping the earliest rows of each class.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        IdxLoadReport* report = nullptr);

/// Writes the IDX pair; pixels are rounded from X * 255. Used by tests and
/// tooling to produce small fixtures.
void write_idx(const LabeledDataset& ds, int rows, int cols, const std::filesystem::path& images,
               const std::filesystem::path& labels);

std::pair<LabeledDataset, LabeledDataset> split_classes(const LabeledDataset& ds,
                                                        const ClassSplit& split);

/// Per-class split; test receives round(fraction * per_class) rows of each class.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed);

struct EpisodeIndices {
    std::vector<int> classes;  // original class ids; position = episode label
    std::vector<std::size_t> support;
    std::vector<std::size_t> query;
};

EpisodeIndices sample_episode_indices(const LabeledDataset& target, const EpisodeSpec& spec,
                                      Rng& rng);

std::pair<LabeledDataset, LabeledDataset> sample_episode(const LabeledDataset& target,
                                                         const EpisodeSpec& spec, Rng& rng);

}  // namespace gcnc
