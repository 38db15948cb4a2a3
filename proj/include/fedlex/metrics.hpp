#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fedlex/config.hpp"
#include "fedlex/orchestrator.hpp"

namespace fedlex {

inline constexpr const char* kMetricsHeader = "round,mean_acc,std_acc,pooled_acc,sigma2_dw,bytes_up,bytes_down";

std::string format_metrics_row(const RoundMetrics& m);

// Appends one row per round and flushes, so partial runs stay readable.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::filesystem::path& csv_path);
    void write(const RoundMetrics& m);

private:
    std::ofstream out_;
};

// Rows of a metrics CSV; participant and loss fields are not stored there.
std::vector<RoundMetrics> read_metrics_csv(const std::filesystem::path& csv_path);

void write_manifest(const std::filesystem::path& path, const RoundConfig& cfg,
                    const std::map<std::string, std::string>& labels, std::size_t param_count);

struct ManifestInfo {
    RoundConfig config;
    std::string config_hash;
    std::string variant;
    std::map<std::string, std::string> labels;
};

ManifestInfo read_manifest(const std::filesystem::path& path);

}  // namespace fedlex
