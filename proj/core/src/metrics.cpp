#include "vpclab/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vpclab/errors.hpp"

namespace vpclab::exp {

namespace {

template <typename V>
void append_number(std::string& out, V v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

template <typename V>
V parse_number(const std::string& s, const std::string& column)
{
    V v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("metrics: bad value '" + s + "' in column " + column);
    return v;
}

} // namespace

const std::vector<std::string>& metrics_columns()
{
    static const std::vector<std::string> cols{
        "run_id",          "worker_id",      "global_step",  "episode_index",
        "episode_extrinsic_return",          "episode_length",
        "mean_intrinsic_reward",             "mean_prediction_error_l2",
        "policy_loss",     "value_loss",     "entropy",      "forward_loss",
        "inverse_loss",    "vpc_loss",       "wall_clock_s"};
    return cols;
}

double metric_value(const MetricsRecord& r, std::string_view c)
{
    if (c == "run_id") return static_cast<double>(r.run_id);
    if (c == "worker_id") return static_cast<double>(r.worker_id);
    if (c == "global_step") return static_cast<double>(r.global_step);
    if (c == "episode_index") return static_cast<double>(r.episode_index);
    if (c == "episode_extrinsic_return") return r.episode_extrinsic_return;
    if (c == "episode_length") return static_cast<double>(r.episode_length);
    if (c == "mean_intrinsic_reward") return r.mean_intrinsic_reward;
    if (c == "mean_prediction_error_l2") return r.mean_prediction_error_l2;
    if (c == "policy_loss") return r.policy_loss;
    if (c == "value_loss") return r.value_loss;
    if (c == "entropy") return r.entropy;
    if (c == "forward_loss") return r.forward_loss;
    if (c == "inverse_loss") return r.inverse_loss;
    if (c == "vpc_loss") return r.vpc_loss;
    if (c == "wall_clock_s") return r.wall_clock_s;
    throw ContractError("metrics: unknown column '" + std::string(c) + "'");
}

std::string csv_header()
{
    std::string out;
    for (const auto& c : metrics_columns()) {
        if (!out.empty())
            out += ',';
        out += c;
    }
    return out + "\r\n";
}

std::string csv_row(const MetricsRecord& r)
{
    std::string out;
    out.reserve(256);
    auto sep = [&] { out += ','; };
    append_number(out, r.run_id); sep();
    append_number(out, r.worker_id); sep();
    append_number(out, r.global_step); sep();
    append_number(out, r.episode_index); sep();
    append_number(out, r.episode_extrinsic_return); sep();
    append_number(out, r.episode_length); sep();
    append_number(out, r.mean_intrinsic_reward); sep();
    append_number(out, r.mean_prediction_error_l2); sep();
    append_number(out, r.policy_loss); sep();
    append_number(out, r.value_loss); sep();
    append_number(out, r.entropy); sep();
    append_number(out, r.forward_loss); sep();
    append_number(out, r.inverse_loss); sep();
    append_number(out, r.vpc_loss); sep();
    append_number(out, r.wall_clock_s);
    return out + "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        switch (ch) {
        case '"':
            in_quotes = true;
            row_has_content = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            row_has_content = true;
            break;
        case '\r':
            break;
        case '\n':
            if (row_has_content || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            row_has_content = false;
            break;
        default:
            field += ch;
            row_has_content = true;
        }
    }
    if (in_quotes)
        throw FormatError("csv: unterminated quoted field");
    if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<MetricsRecord> parse_metrics(std::string_view text)
{
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0] != metrics_columns())
        throw FormatError("metrics: header does not match the metrics schema");
    const auto& cols = metrics_columns();
    std::vector<MetricsRecord> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        if (f.size() != cols.size())
            throw FormatError("metrics: row " + std::to_string(i) + " has " + std::to_string(f.size())
                              + " fields, expected " + std::to_string(cols.size()));
        MetricsRecord r;
        std::size_t k = 0;
        r.run_id = parse_number<std::int64_t>(f[k], cols[k]); ++k;
        r.worker_id = parse_number<std::int64_t>(f[k], cols[k]); ++k;
        r.global_step = parse_number<std::int64_t>(f[k], cols[k]); ++k;
        r.episode_index = parse_number<std::int64_t>(f[k], cols[k]); ++k;
        r.episode_extrinsic_return = parse_number<double>(f[k], cols[k]); ++k;
        r.episode_length = parse_number<std::int64_t>(f[k], cols[k]); ++k;
        r.mean_intrinsic_reward = parse_number<double>(f[k], cols[k]); ++k;
        r.mean_prediction_error_l2 = parse_number<double>(f[k], cols[k]); ++k;
        r.policy_loss = parse_number<double>(f[k], cols[k]); ++k;
        r.value_loss = parse_number<double>(f[k], cols[k]); ++k;
        r.entropy = parse_number<double>(f[k], cols[k]); ++k;
        r.forward_loss = parse_number<double>(f[k], cols[k]); ++k;
        r.inverse_loss = parse_number<double>(f[k], cols[k]); ++k;
        r.vpc_loss = parse_number<double>(f[k], cols[k]); ++k;
        r.wall_clock_s = parse_number<double>(f[k], cols[k]);
        out.push_back(r);
    }
    return out;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("metrics: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_metrics(ss.str());
}

} // namespace vpclab::exp
