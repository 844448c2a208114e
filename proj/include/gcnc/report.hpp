#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gcnc/metrics.hpp"

namespace gcnc {

/// %.17g, which round-trips every finite double; non-finite values become
/// `null` in JSON and an empty field in CSV.
std::string format_json_number(double v);
std::string format_csv_number(double v);

/// Field names of MetricsRecord, in serialization order.
const std::vector<std::string>& metrics_record_fields();

/// One JSON object, keys exactly the MetricsRecord field names.
std::string to_json_line(const MetricsRecord& r);

/// CSV cells of a record, aligned with metrics_record_fields().
std::vector<std::string> to_csv_cells(const MetricsRecord& r);

/// Append-only JSONL file; every line is flushed as it is written so an
/// interrupted run leaves a valid prefix.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path);
    void write(const MetricsRecord& r);

private:
    std::ofstream out_;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace gcnc
