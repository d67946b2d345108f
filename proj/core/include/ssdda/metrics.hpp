#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace ssdda {

// One line of the training metrics stream. Loss fields are absent on the
// pre-training evaluation row; val_miou is absent on non-eval rows.
struct MetricsRow {
    std::int64_t iter = 0;
    bool has_losses = false;
    double l_s = 0.0;
    double l_t = 0.0;
    double l_u = 0.0;
    double total = 0.0;
    double lr = 0.0;
    bool has_miou = false;
    double val_miou = 0.0;
};

inline constexpr const char* kMetricsHeader = "iter,L_s,L_t,L_u,total,lr,val_miou";

std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);

// Append-only CSV writer; emits the header when creating a fresh file.
class MetricsWriter {
public:
    MetricsWriter(const std::filesystem::path& path, bool append = false);
    void write(const MetricsRow& row);
    void flush();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

} // namespace ssdda
