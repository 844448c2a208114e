#include "gcnc/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "gcnc/errors.hpp"

namespace gcnc {

namespace {

using FieldRef = std::variant<int*, double*, bool*, std::string*, std::uint64_t*, std::vector<int>*,
                              std::vector<double>*, std::vector<std::uint64_t>*, Activation*>;

struct Field {
    std::string key;
    std::function<FieldRef(ExperimentConfig&)> ref;
};

#define GCNC_FIELD(key, member) \
    Field { key, [](ExperimentConfig& c) -> FieldRef { return &c.member; } }

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = {
        GCNC_FIELD("dataset.kind", dataset.kind),
        GCNC_FIELD("dataset.k", dataset.k),
        GCNC_FIELD("dataset.d", dataset.d),
        GCNC_FIELD("dataset.mean_scale", dataset.mean_scale),
        GCNC_FIELD("dataset.sigma", dataset.sigma),
        GCNC_FIELD("dataset.m_per_class", dataset.m_per_class),
        GCNC_FIELD("dataset.seed", dataset.seed),
        GCNC_FIELD("dataset.images", dataset.images),
        GCNC_FIELD("dataset.labels", dataset.labels),
        GCNC_FIELD("dataset.test_fraction", dataset.test_fraction),
        GCNC_FIELD("dataset.source_classes", dataset.source_classes),
        GCNC_FIELD("dataset.target_classes", dataset.target_classes),
        GCNC_FIELD("network.layer_widths", train.network.layer_widths),
        GCNC_FIELD("network.activation", train.network.activation),
        GCNC_FIELD("train.lr", train.lr),
        GCNC_FIELD("train.batch_size", train.batch_size),
        GCNC_FIELD("train.l2", train.l2),
        GCNC_FIELD("train.gc_reg", train.gc_reg),
        GCNC_FIELD("train.steps", train.steps),
        GCNC_FIELD("train.log_every", train.log_every),
        GCNC_FIELD("train.seed", train.seed),
        GCNC_FIELD("train.eval_batch", train.eval_batch),
        GCNC_FIELD("train.sharpness_probes", train.sharpness_probes),
        GCNC_FIELD("sweep.axis", sweep.axis),
        GCNC_FIELD("sweep.values", sweep.values),
        GCNC_FIELD("sweep.seeds", sweep.seeds),
        GCNC_FIELD("sweep.max_parallel", sweep.max_parallel),
        GCNC_FIELD("transfer.n_way", transfer.episodes.n_way),
        GCNC_FIELD("transfer.n_shot", transfer.episodes.n_shot),
        GCNC_FIELD("transfer.n_query", transfer.episodes.n_query),
        GCNC_FIELD("transfer.n_episodes", transfer.episodes.n_episodes),
        GCNC_FIELD("transfer.lambda", transfer.lambda),
        GCNC_FIELD("bounds.c", bounds.c),
        GCNC_FIELD("bounds.include_lipschitz", bounds.include_lipschitz),
        GCNC_FIELD("bounds.delta", bounds.delta),
        GCNC_FIELD("bounds.rademacher_trials", bounds.rademacher_trials),
        GCNC_FIELD("bounds.safety", bounds.safety),
        GCNC_FIELD("estimate.subnet", estimate.subnet),
        GCNC_FIELD("estimate.trials", estimate.trials),
        GCNC_FIELD("estimate.batch", estimate.batch),
        GCNC_FIELD("estimate.fractions", estimate.fractions),
        GCNC_FIELD("output.dir", output.dir),
        GCNC_FIELD("output.run_id", output.run_id),
    };
    return fields;
}

#undef GCNC_FIELD

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& raw) {
    Int v{};
    const auto* end = raw.data() + raw.size();
    const auto res = std::from_chars(raw.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ConfigError(key, "expected an integer, got '" + raw + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& raw) {
    if (raw.empty()) throw ConfigError(key, "expected a number");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (errno != 0 || end != raw.c_str() + raw.size() || !std::isfinite(v))
        throw ConfigError(key, "expected a finite number, got '" + raw + "'");
    return v;
}

std::vector<std::string> parse_list(const std::string& key, const std::string& raw) {
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
        throw ConfigError(key, "expected a list like [a, b], got '" + raw + "'");
    std::vector<std::string> items;
    const std::string body = trim(std::string_view(raw).substr(1, raw.size() - 2));
    if (body.empty()) return items;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(key, "empty list element");
        items.push_back(item);
    }
    return items;
}

std::string unquote(const std::string& raw) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
        return raw.substr(1, raw.size() - 2);
    return raw;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T, class F>
std::string format_list(const std::vector<T>& v, F&& fmt) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt(v[i]);
    }
    return out + "]";
}

void assign(const std::string& key, FieldRef ref, const std::string& raw) {
    std::visit(
        [&](auto* target) {
            using T = std::remove_pointer_t<decltype(target)>;
            if constexpr (std::is_same_v<T, int>) {
                *target = parse_integer<int>(key, raw);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                *target = parse_integer<std::uint64_t>(key, raw);
            } else if constexpr (std::is_same_v<T, double>) {
                *target = parse_real(key, raw);
            } else if constexpr (std::is_same_v<T, bool>) {
                if (raw == "true") *target = true;
                else if (raw == "false") *target = false;
                else throw ConfigError(key, "expected true or false, got '" + raw + "'");
            } else if constexpr (std::is_same_v<T, std::string>) {
                const std::string s = unquote(raw);
                if (s.find('"') != std::string::npos)
                    throw ConfigError(key, "strings may not contain double quotes");
                *target = s;
            } else if constexpr (std::is_same_v<T, Activation>) {
                try {
                    *target = activation_from_string(unquote(raw));
                } catch (const ContractError& e) {
                    throw ConfigError(key, e.what());
                }
            } else if constexpr (std::is_same_v<T, std::vector<int>>) {
                target->clear();
                for (const auto& item : parse_list(key, raw))
                    target->push_back(parse_integer<int>(key, item));
            } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
                target->clear();
                for (const auto& item : parse_list(key, raw))
                    target->push_back(parse_integer<std::uint64_t>(key, item));
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                target->clear();
                for (const auto& item : parse_list(key, raw)) target->push_back(parse_real(key, item));
            }
        },
        ref);
}

std::string render(FieldRef ref) {
    return std::visit(
        [](auto* target) -> std::string {
            using T = std::remove_pointer_t<decltype(target)>;
            if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                return std::to_string(*target);
            } else if constexpr (std::is_same_v<T, double>) {
                return format_real(*target);
            } else if constexpr (std::is_same_v<T, bool>) {
                return *target ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return "\"" + *target + "\"";
            } else if constexpr (std::is_same_v<T, Activation>) {
                return std::string(to_string(*target));
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                return format_list(*target, format_real);
            } else {
                return format_list(*target, [](auto v) { return std::to_string(v); });
            }
        },
        ref);
}

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

void validate(const ExperimentConfig& c) {
    const auto& ds = c.dataset;
    require(ds.kind == "gaussian_mixture" || ds.kind == "idx", "dataset.kind",
            "must be gaussian_mixture or idx");
    require(ds.k >= 1, "dataset.k", "must be >= 1");
    require(ds.d >= 1, "dataset.d", "must be >= 1");
    require(ds.mean_scale >= 0.0, "dataset.mean_scale", "must be >= 0");
    require(ds.sigma > 0.0, "dataset.sigma", "must be > 0");
    require(ds.m_per_class >= 1, "dataset.m_per_class", "must be >= 1");
    require(ds.test_fraction > 0.0 && ds.test_fraction < 1.0, "dataset.test_fraction",
            "must lie in (0, 1)");
    if (ds.kind == "idx") {
        require(!ds.images.empty(), "dataset.images", "required for idx datasets");
        require(!ds.labels.empty(), "dataset.labels", "required for idx datasets");
    }
    require(ds.source_classes.empty() == ds.target_classes.empty(), "dataset.target_classes",
            "source and target class lists must be given together");

    const auto& t = c.train;
    require(t.network.layer_widths.size() >= 3, "network.layer_widths",
            "needs at least 3 widths");
    require(std::all_of(t.network.layer_widths.begin(), t.network.layer_widths.end(),
                        [](int w) { return w >= 1; }),
            "network.layer_widths", "widths must be positive");
    if (ds.kind == "gaussian_mixture") {
        require(t.network.input_dim() == ds.d, "network.layer_widths",
                "first width must equal dataset.d");
        const int k_src = ds.source_classes.empty() ? ds.k
                                                    : static_cast<int>(ds.source_classes.size());
        require(t.network.num_classes() == k_src, "network.layer_widths",
                "last width must equal the number of (source) classes");
    }
    require(t.lr > 0.0, "train.lr", "must be > 0");
    require(t.batch_size >= 1, "train.batch_size", "must be >= 1");
    require(t.l2 >= 0.0, "train.l2", "must be >= 0");
    require(t.gc_reg >= 0.0, "train.gc_reg", "must be >= 0");
    require(t.steps >= 0, "train.steps", "must be >= 0");
    require(t.log_every >= 1, "train.log_every", "must be >= 1");
    require(t.steps == 0 || t.log_every <= t.steps, "train.log_every", "must not exceed train.steps");
    require(t.eval_batch >= 1, "train.eval_batch", "must be >= 1");
    require(t.sharpness_probes >= 1, "train.sharpness_probes", "must be >= 1");

    const auto& s = c.sweep;
    require(s.axis == "lr" || s.axis == "batch_size" || s.axis == "l2" || s.axis == "gc_reg",
            "sweep.axis", "must be one of lr, batch_size, l2, gc_reg");
    require(!s.seeds.empty(), "sweep.seeds", "needs at least one seed");
    require(s.max_parallel >= 1, "sweep.max_parallel", "must be >= 1");

    const auto& e = c.transfer.episodes;
    require(e.n_way >= 1, "transfer.n_way", "must be >= 1");
    require(e.n_shot >= 1, "transfer.n_shot", "must be >= 1");
    require(e.n_query >= 1, "transfer.n_query", "must be >= 1");
    require(e.n_episodes >= 1, "transfer.n_episodes", "must be >= 1");

    const auto& b = c.bounds;
    require(b.delta > 0.0 && b.delta < 1.0, "bounds.delta", "must lie in (0, 1)");
    require(b.rademacher_trials >= 1, "bounds.rademacher_trials", "must be >= 1");
    require(b.safety > 0.0, "bounds.safety", "must be > 0");

    const auto& g = c.estimate;
    require(g.subnet == "embedding" || g.subnet == "logit", "estimate.subnet",
            "must be embedding or logit");
    require(g.trials >= 1, "estimate.trials", "must be >= 1");
    require(g.batch >= 1, "estimate.batch", "must be >= 1");
    for (double f : g.fractions)
        require(f > 0.0 && f <= 1.0, "estimate.fractions", "fractions must lie in (0, 1]");

    require(!c.output.run_id.empty(), "output.run_id", "must not be empty");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string raw = trim(std::string_view(body).substr(eq + 1));
        const auto& fields = schema();
        const auto it = std::find_if(fields.begin(), fields.end(),
                                     [&](const Field& f) { return f.key == key; });
        if (it == fields.end()) throw ConfigError(key, "unknown key");
        if (!seen.insert(key).second) throw ConfigError(key, "key given twice");
        assign(key, it->ref(cfg), raw);
    }

    if (!seen.count("network.layer_widths") && cfg.dataset.kind == "gaussian_mixture") {
        const int k_src = cfg.dataset.source_classes.empty()
                              ? cfg.dataset.k
                              : static_cast<int>(cfg.dataset.source_classes.size());
        cfg.train.network.layer_widths = {cfg.dataset.d, 64, 32, k_src};
    }
    if (!seen.count("train.log_every")) cfg.train.log_every = std::max(1, cfg.train.steps / 100);
    cfg.train.bounds.c = cfg.bounds.c > 0.0 ? cfg.bounds.c : 1.0;
    cfg.train.bounds.delta = cfg.bounds.delta;
    cfg.train.bounds.include_lipschitz = cfg.bounds.include_lipschitz;
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    std::string out;
    for (const Field& f : schema()) out += f.key + " = " + render(f.ref(copy)) + "\n";
    return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return format_config(a) == format_config(b);
}

}  // namespace gcnc
