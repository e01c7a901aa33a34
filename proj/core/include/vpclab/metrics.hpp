#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vpclab::exp {

/// One finished episode of one worker.
struct MetricsRecord {
    std::int64_t run_id = 0;
    std::int64_t worker_id = 0;
    std::int64_t global_step = 0;
    std::int64_t episode_index = 0;
    double episode_extrinsic_return = 0.0;
    std::int64_t episode_length = 0;
    double mean_intrinsic_reward = 0.0;
    double mean_prediction_error_l2 = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double forward_loss = 0.0;
    double inverse_loss = 0.0;
    double vpc_loss = 0.0;
    double wall_clock_s = 0.0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Column names in MetricsRecord field order.
const std::vector<std::string>& metrics_columns();

/// Numeric value of a column by name. Throws ContractError for unknown names.
double metric_value(const MetricsRecord& r, std::string_view column);

std::string csv_header();
/// Shortest round-trip decimal for every field, CRLF-terminated.
std::string csv_row(const MetricsRecord& r);

/// RFC 4180 field splitting (quoted fields, doubled quotes, CRLF or LF).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Parses a metrics file; the header must match metrics_columns() exactly.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);
std::vector<MetricsRecord> parse_metrics(std::string_view text);

} // namespace vpclab::exp
