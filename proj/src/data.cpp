#include "gcnc/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gcnc/errors.hpp"

namespace gcnc {

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(k, 0)), 0);
    for (int label : y)
        if (label >= 0 && label < k) ++counts[static_cast<std::size_t>(label)];
    return counts;
}

std::size_t LabeledDataset::per_class() const {
    return k > 0 ? size() / static_cast<std::size_t>(k) : 0;
}

std::vector<std::vector<std::size_t>> LabeledDataset::class_indices() const {
    std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < y.size(); ++i) idx[static_cast<std::size_t>(y[i])].push_back(i);
    return idx;
}

void LabeledDataset::validate() const {
    if (k < 1) throw ContractError("dataset needs at least one class");
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw ContractError("dataset has " + std::to_string(X.rows()) + " rows but " +
                            std::to_string(y.size()) + " labels");
    for (int label : y)
        if (label < 0 || label >= k) throw ContractError("label out of range");
    if (!X.allFinite()) throw ContractError("dataset contains non-finite inputs");
    const auto counts = class_counts();
    for (std::size_t c : counts)
        if (c != counts.front())
            throw ContractError("dataset is not class-balanced");
}

LabeledDataset select_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.k = ds.k;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
    out.y.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= ds.size()) throw ContractError("row index out of range");
        out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(rows[i]));
        out.y.push_back(ds.y[rows[i]]);
    }
    return out;
}

void EpisodeSpec::validate() const {
    if (n_way < 1 || n_shot < 1 || n_query < 1 || n_episodes < 1)
        throw ContractError("episode spec fields must be positive");
}

// ---------------------------------------------------------------------------
// Synthetic mixtures

GaussianMixture GaussianMixture::random(int k, int d, double mean_scale, double sigma, Rng& rng) {
    if (k < 1 || d < 1) throw ContractError("mixture needs k, d >= 1");
    if (!(sigma > 0.0)) throw ContractError("mixture sigma must be positive");
    GaussianMixture g;
    g.sigma = sigma;
    g.means.resize(k, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int c = 0; c < k; ++c) {
        Vector dir(d);
        do {
            for (int j = 0; j < d; ++j) dir(j) = normal(rng);
        } while (dir.norm() == 0.0);
        g.means.row(c) = mean_scale * dir.normalized().transpose();
    }
    return g;
}

LabeledDataset GaussianMixture::sample(int m_per_class, Rng& rng) const {
    if (m_per_class < 1) throw ContractError("m_per_class must be >= 1");
    const auto k = means.rows();
    const auto d = means.cols();
    LabeledDataset ds;
    ds.k = static_cast<int>(k);
    ds.X.resize(k * m_per_class, d);
    ds.y.reserve(static_cast<std::size_t>(k * m_per_class));
    std::normal_distribution<double> normal(0.0, sigma);
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
        for (int i = 0; i < m_per_class; ++i, ++row) {
            for (Eigen::Index j = 0; j < d; ++j) ds.X(row, j) = means(c, j) + normal(rng);
            ds.y.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

LabeledDataset gen_gaussian_mixture(int k, int d, double mean_scale, double sigma, int m_per_class,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const GaussianMixture g = GaussianMixture::random(k, d, mean_scale, sigma, rng);
    return g.sample(m_per_class, rng);
}

// ---------------------------------------------------------------------------
// IDX files

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& what) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw FormatError("truncated IDX header (" + what + ")");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>((v >> 24) & 0xff),
                                static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        IdxLoadReport* report) {
    std::ifstream img = open_binary(images);
    std::ifstream lab = open_binary(labels);

    const std::uint32_t img_magic = read_be32(img, "image magic");
    if (img_magic != kImageMagic)
        throw FormatError(images.string() + ": bad image magic " + std::to_string(img_magic));
    const std::uint32_t n_img = read_be32(img, "image count");
    const std::uint32_t rows = read_be32(img, "rows");
    const std::uint32_t cols = read_be32(img, "cols");

    const std::uint32_t lab_magic = read_be32(lab, "label magic");
    if (lab_magic != kLabelMagic)
        throw FormatError(labels.string() + ": bad label magic " + std::to_string(lab_magic));
    const std::uint32_t n_lab = read_be32(lab, "label count");
    if (n_img != n_lab)
        throw FormatError("image count " + std::to_string(n_img) + " != label count " +
                          std::to_string(n_lab));

    const std::size_t d = std::size_t{rows} * cols;
    std::vector<unsigned char> pixels(std::size_t{n_img} * d);
    std::vector<unsigned char> raw_labels(n_lab);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
        throw FormatError(images.string() + ": truncated pixel data");
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                  static_cast<std::streamsize>(raw_labels.size())))
        throw FormatError(labels.string() + ": truncated label data");
    if (n_img == 0) throw FormatError("IDX files contain no examples");

    const int k = *std::max_element(raw_labels.begin(), raw_labels.end()) + 1;
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (unsigned char l : raw_labels) ++counts[l];
    const std::size_t keep = *std::min_element(counts.begin(), counts.end());
    if (keep == 0) throw FormatError("some class below the largest label has no examples");

    std::vector<std::size_t> kept_rows;
    std::vector<std::size_t> taken(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < raw_labels.size(); ++i)
        if (taken[raw_labels[i]]++ < keep) kept_rows.push_back(i);

    LabeledDataset ds;
    ds.k = k;
    ds.X.resize(static_cast<Eigen::Index>(kept_rows.size()), static_cast<Eigen::Index>(d));
    ds.y.reserve(kept_rows.size());
    for (std::size_t r = 0; r < kept_rows.size(); ++r) {
        const std::size_t src = kept_rows[r];
        for (std::size_t j = 0; j < d; ++j)
            ds.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                pixels[src * d + j] / 255.0;
        ds.y.push_back(raw_labels[src]);
    }
    if (report) {
        report->rows_read = raw_labels.size();
        report->rows_trimmed = raw_labels.size() - kept_rows.size();
    }
    return ds;
}

void write_idx(const LabeledDataset& ds, int rows, int cols, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
    if (static_cast<long>(rows) * cols != ds.X.cols())
        throw ContractError("rows * cols must equal the input dimension");
    std::ofstream img(images, std::ios::binary);
    std::ofstream lab(labels, std::ios::binary);
    if (!img || !lab) throw FormatError("cannot open IDX output files");
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<std::uint32_t>(ds.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<std::uint32_t>(ds.size()));
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
            const double v = std::clamp(std::round(ds.X(i, j) * 255.0), 0.0, 255.0);
            img.put(static_cast<char>(static_cast<unsigned char>(v)));
        }
        lab.put(static_cast<char>(static_cast<unsigned char>(ds.y[static_cast<std::size_t>(i)])));
    }
}

// ---------------------------------------------------------------------------
// Splits and episodes

std::pair<LabeledDataset, LabeledDataset> split_classes(const LabeledDataset& ds,
                                                        const ClassSplit& split) {
    if (split.source.empty() || split.target.empty())
        throw ContractError("class split needs non-empty source and target lists");
    std::set<int> seen;
    for (const auto* side : {&split.source, &split.target})
        for (int c : *side) {
            if (c < 0 || c >= ds.k) throw ContractError("class id out of range in split");
            if (!seen.insert(c).second)
                throw ContractError("class " + std::to_string(c) + " appears twice in split");
        }

    auto extract = [&ds](const std::vector<int>& ids) {
        std::vector<int> remap(static_cast<std::size_t>(ds.k), -1);
        for (std::size_t i = 0; i < ids.size(); ++i)
            remap[static_cast<std::size_t>(ids[i])] = static_cast<int>(i);
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (remap[static_cast<std::size_t>(ds.y[i])] >= 0) rows.push_back(i);
        LabeledDataset out = select_rows(ds, rows);
        for (int& label : out.y) label = remap[static_cast<std::size_t>(label)];
        out.k = static_cast<int>(ids.size());
        return out;
    };
    return {extract(split.source), extract(split.target)};
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ContractError("test_fraction must lie in (0, 1)");
    ds.validate();
    const std::size_t per_class = ds.per_class();
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(per_class)));
    if (n_test == 0 || n_test >= per_class)
        throw ContractError("test_fraction leaves a side of the split without examples");

    Rng rng(seed);
    std::vector<std::size_t> train_rows, test_rows;
    for (auto& idx : ds.class_indices()) {
        std::shuffle(idx.begin(), idx.end(), rng);
        test_rows.insert(test_rows.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
        train_rows.insert(train_rows.end(), idx.begin() + static_cast<long>(n_test), idx.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {select_rows(ds, train_rows), select_rows(ds, test_rows)};
}

EpisodeIndices sample_episode_indices(const LabeledDataset& target, const EpisodeSpec& spec,
                                      Rng& rng) {
    spec.validate();
    if (spec.n_way > target.k)
        throw ContractError("n_way exceeds the number of target classes");
    auto by_class = target.class_indices();
    for (const auto& idx : by_class)
        if (idx.size() < static_cast<std::size_t>(spec.n_shot + spec.n_query))
            throw ContractError("target class has fewer than n_shot + n_query examples");

    std::vector<int> all(static_cast<std::size_t>(target.k));
    std::iota(all.begin(), all.end(), 0);
    EpisodeIndices ep;
    std::sample(all.begin(), all.end(), std::back_inserter(ep.classes), spec.n_way, rng);
    std::shuffle(ep.classes.begin(), ep.classes.end(), rng);

    for (int c : ep.classes) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        std::vector<std::size_t> drawn;
        std::sample(pool.begin(), pool.end(), std::back_inserter(drawn),
                    spec.n_shot + spec.n_query, rng);
        std::shuffle(drawn.begin(), drawn.end(), rng);
        ep.support.insert(ep.support.end(), drawn.begin(), drawn.begin() + spec.n_shot);
        ep.query.insert(ep.query.end(), drawn.begin() + spec.n_shot, drawn.end());
    }
    return ep;
}

std::pair<LabeledDataset, LabeledDataset> sample_episode(const LabeledDataset& target,
                                                         const EpisodeSpec& spec, Rng& rng) {
    const EpisodeIndices ep = sample_episode_indices(target, spec, rng);
    auto relabel = [&](const std::vector<std::size_t>& rows, int per_class) {
        LabeledDataset out = select_rows(target, rows);
        out.k = spec.n_way;
        for (std::size_t i = 0; i < out.y.size(); ++i)
            out.y[i] = static_cast<int>(i / static_cast<std::size_t>(per_class));
        return out;
    };
    return {relabel(ep.support, spec.n_shot), relabel(ep.query, spec.n_query)};
}

}  // namespace gcnc
