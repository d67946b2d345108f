#include "ssdda/metrics.hpp"

#include <charconv>

#include "ssdda/errors.hpp"
#include "ssdda/kvconfig.hpp"

namespace ssdda {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_field(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("metrics: bad numeric field: " + s);
    return v;
}

} // namespace

std::string format_metrics_row(const MetricsRow& row) {
    std::string out = std::to_string(row.iter);
    if (row.has_losses) {
        out += ',' + format_double(row.l_s);
        out += ',' + format_double(row.l_t);
        out += ',' + format_double(row.l_u);
        out += ',' + format_double(row.total);
        out += ',' + format_double(row.lr);
    } else {
        out += ",,,,,";
    }
    out += ',';
    if (row.has_miou)
        out += format_double(row.val_miou);
    return out;
}

MetricsRow parse_metrics_row(const std::string& line) {
    const auto fields = split_csv(line);
    if (fields.size() != 7)
        throw FormatError("metrics: expected 7 fields, got " + std::to_string(fields.size()) +
                          " in: " + line);
    MetricsRow row;
    row.iter = static_cast<std::int64_t>(parse_field(fields[0]));
    row.has_losses = !fields[1].empty();
    if (row.has_losses) {
        row.l_s = parse_field(fields[1]);
        row.l_t = parse_field(fields[2]);
        row.l_u = parse_field(fields[3]);
        row.total = parse_field(fields[4]);
        row.lr = parse_field(fields[5]);
    }
    row.has_miou = !fields[6].empty();
    if (row.has_miou)
        row.val_miou = parse_field(fields[6]);
    return row;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append) : path_(path) {
    const bool fresh = !append || !std::filesystem::exists(path);
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_)
        throw IoError("cannot open metrics file " + path.string());
    if (fresh)
        out_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricsRow& row) {
    out_ << format_metrics_row(row) << '\n';
    if (!out_)
        throw IoError("write failed for metrics file " + path_.string());
}

void MetricsWriter::flush() {
    out_.flush();
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open metrics file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw FormatError(path.string() + ": missing metrics header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        rows.push_back(parse_metrics_row(line));
    }
    return rows;
}

} // namespace ssdda
