#include "gcnc/report.hpp"

#include <cmath>
#include <cstdio>

#include "gcnc/errors.hpp"

namespace gcnc {

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt_json(const std::optional<double>& v) {
    return v ? format_json_number(*v) : "null";
}

std::string opt_csv(const std::optional<double>& v) {
    return v ? format_csv_number(*v) : "";
}

}  // namespace

std::string format_json_number(double v) { return std::isfinite(v) ? g17(v) : "null"; }
std::string format_csv_number(double v) { return std::isfinite(v) ? g17(v) : ""; }

const std::vector<std::string>& metrics_record_fields() {
    static const std::vector<std::string> names = {
        "step",          "train_loss",     "train_acc",          "test_acc",
        "embedding_gc",  "logit_gc",       "nc",                 "geometric_collapse",
        "inv_sq_dist_sum", "slope",        "sharpness",          "c_lower_bound",
        "gen_bound_lhs", "gen_bound_rhs",  "target_nc",          "ridge_acc",
        "nearest_mean_acc"};
    return names;
}

std::vector<std::string> to_csv_cells(const MetricsRecord& r) {
    return {std::to_string(r.step),
            format_csv_number(r.train_loss),
            format_csv_number(r.train_acc),
            format_csv_number(r.test_acc),
            format_csv_number(r.embedding_gc),
            format_csv_number(r.logit_gc),
            format_csv_number(r.nc),
            format_csv_number(r.geometric_collapse),
            format_csv_number(r.inv_sq_dist_sum),
            format_csv_number(r.slope),
            format_csv_number(r.sharpness),
            format_csv_number(r.c_lower_bound),
            format_csv_number(r.gen_bound_lhs),
            format_csv_number(r.gen_bound_rhs),
            opt_csv(r.target_nc),
            opt_csv(r.ridge_acc),
            opt_csv(r.nearest_mean_acc)};
}

std::string to_json_line(const MetricsRecord& r) {
    const std::vector<std::string> values = {
        std::to_string(r.step),
        format_json_number(r.train_loss),
        format_json_number(r.train_acc),
        format_json_number(r.test_acc),
        format_json_number(r.embedding_gc),
        format_json_number(r.logit_gc),
        format_json_number(r.nc),
        format_json_number(r.geometric_collapse),
        format_json_number(r.inv_sq_dist_sum),
        format_json_number(r.slope),
        format_json_number(r.sharpness),
        format_json_number(r.c_lower_bound),
        format_json_number(r.gen_bound_lhs),
        format_json_number(r.gen_bound_rhs),
        opt_json(r.target_nc),
        opt_json(r.ridge_acc),
        opt_json(r.nearest_mean_acc)};
    const auto& names = metrics_record_fields();
    std::string line = "{";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) line += ",";
        line += "\"" + names[i] + "\":" + values[i];
    }
    return line + "}";
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void JsonlWriter::write(const MetricsRecord& r) {
    out_ << to_json_line(r) << '\n';
    out_.flush();
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc), columns_(header.size()) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ContractError("CSV row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
}

}  // namespace gcnc
