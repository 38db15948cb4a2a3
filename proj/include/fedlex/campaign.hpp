#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedlex/config.hpp"

namespace fedlex {

// One cell of a campaign grid.
struct RunSpec {
    std::string variant;
    std::string point;  // "base" or "key=value;key=value"
    std::uint64_t seed = 0;
    RoundConfig config;
    std::filesystem::path dir;
};

// variants x sweep grid x seeds, in that nesting order. Every resulting
// config is validated.
std::vector<RunSpec> expand(const Campaign& campaign);

struct RunOutcome {
    RunSpec spec;
    bool ok = false;
    std::string error;
};

struct SummaryRow {
    std::string variant;
    std::string point;
    double mean_acc = 0.0;  // mean over seeds of the final-round mean accuracy
    double std_acc = 0.0;   // population std over seeds
    std::size_t runs = 0;
    double rank = 0.0;       // among variants at this point (1 = best)
    double mean_rank = 0.0;  // the variant's rank averaged over points
};

struct Summary {
    std::vector<SummaryRow> rows;                              // sorted by (variant, point)
    std::vector<std::pair<std::string, double>> mean_ranks;   // sorted by variant
    std::vector<std::filesystem::path> incomplete;
};

struct CampaignResult {
    std::vector<RunOutcome> runs;
    Summary summary;

    bool all_ok() const;
};

// Runs every grid cell (campaign.workers at a time), writes per-run output
// under campaign.output_dir plus summary.csv and ranks.csv.
CampaignResult run_campaign(const Campaign& campaign);

// Scans the given directories (recursively) for run directories holding a
// manifest.json and aggregates their final-round accuracies.
Summary summarize(const std::vector<std::filesystem::path>& roots);

void write_summary(const Summary& summary, const std::filesystem::path& dir);

// Ranks of `scores` where the highest score gets rank 1; ties share the
// average of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& scores);

}  // namespace fedlex
