#include "fedlex/metrics.hpp"

#include <sstream>

#include <json.hpp>

#include "fedlex/error.hpp"

namespace fedlex {

std::string format_metrics_row(const RoundMetrics& m) {
    return std::to_string(m.round) + "," + format_double(m.mean_acc) + "," + format_double(m.std_acc) + "," +
           format_double(m.pooled_acc) + "," + format_double(m.sigma2_dw) + "," + std::to_string(m.bytes_up) + "," +
           std::to_string(m.bytes_down);
}

MetricsWriter::MetricsWriter(const std::filesystem::path& csv_path) : out_(csv_path, std::ios::trunc) {
    if (!out_) throw FormatError("cannot write " + csv_path.string());
    out_ << kMetricsHeader << '\n';
    out_.flush();
}

void MetricsWriter::write(const RoundMetrics& m) {
    out_ << format_metrics_row(m) << '\n';
    out_.flush();
}

std::vector<RoundMetrics> read_metrics_csv(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw FormatError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw FormatError(csv_path.string() + ": unexpected header");

    std::vector<RoundMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw FormatError(csv_path.string() + ": expected 7 columns in '" + line + "'");
        try {
            RoundMetrics m;
            m.round = std::stoi(cells[0]);
            m.mean_acc = std::stod(cells[1]);
            m.std_acc = std::stod(cells[2]);
            m.pooled_acc = std::stod(cells[3]);
            m.sigma2_dw = std::stod(cells[4]);
            m.bytes_up = std::stoull(cells[5]);
            m.bytes_down = std::stoull(cells[6]);
            rows.push_back(m);
        } catch (const std::logic_error&) {
            throw FormatError(csv_path.string() + ": malformed row '" + line + "'");
        }
    }
    return rows;
}

void write_manifest(const std::filesystem::path& path, const RoundConfig& cfg,
                    const std::map<std::string, std::string>& labels, std::size_t param_count) {
    nlohmann::ordered_json j;
    j["variant"] = cfg.variant_name();
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [k, v] : to_key_values(cfg)) config[k] = v;
    j["config"] = config;
    j["config_hash"] = content_hash(canonical_text(cfg));
    const auto hyper = cfg.hyper();
    j["resolved"] = {
        {"explorers", cfg.fedlex ? cfg.resolved_explorers() : 0},
        {"explorers_given_as", cfg.explorers.fraction ? "fraction" : "count"},
        {"server_lr", hyper.server_lr},
        {"param_count", param_count},
    };
    j["labels"] = labels;

    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

ManifestInfo read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();

    ManifestInfo info;
    info.config = parse_config_text(ss.str()).base;
    const auto j = nlohmann::json::parse(ss.str());
    info.config_hash = j.value("config_hash", "");
    info.variant = j.value("variant", info.config.variant_name());
    if (j.contains("labels"))
        for (const auto& [k, v] : j["labels"].items()) info.labels[k] = v.get<std::string>();
    return info;
}

}  // namespace fedlex
