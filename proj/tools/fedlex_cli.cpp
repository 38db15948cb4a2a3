// Command-line front end: single runs, campaigns and summaries.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedlex/campaign.hpp"
#include "fedlex/config.hpp"
#include "fedlex/error.hpp"
#include "fedlex/metrics.hpp"
#include "fedlex/orchestrator.hpp"

namespace {

// Registers --<key> for every config key; values are applied after the file.
void add_overrides(CLI::App* cmd, std::map<std::string, std::string>& overrides) {
    for (const auto& key : fedlex::config_keys())
        cmd->add_option("--" + key, overrides[key], "override config key '" + key + "'");
}

void apply_overrides(fedlex::RoundConfig& cfg, const std::map<std::string, std::string>& overrides,
                     const CLI::App* cmd) {
    for (const auto& [key, value] : overrides)
        if (cmd->count("--" + key) > 0) fedlex::set_config_value(cfg, key, value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated loss exploration simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int workers = 0;
    bool quiet = false;
    std::map<std::string, std::string> run_overrides;
    std::map<std::string, std::string> campaign_overrides;
    std::vector<std::string> summary_dirs;

    auto* run = app.add_subcommand("run", "run one experiment from a config file or manifest");
    run->add_option("config", config_path, "config file (key: value) or manifest.json")->required();
    run->add_option("--out", out_dir, "output directory")->default_val("run_output");
    run->add_flag("--quiet", quiet, "do not print per-round metrics");
    add_overrides(run, run_overrides);

    std::string campaign_config;
    std::string campaign_out;
    auto* campaign = app.add_subcommand("campaign", "run variants x sweep grid x seeds");
    campaign->add_option("config", campaign_config, "campaign config file")->required();
    campaign->add_option("--out", campaign_out, "output directory (overrides output_dir)");
    campaign->add_option("--workers", workers, "parallel runs (overrides workers)");
    add_overrides(campaign, campaign_overrides);

    std::string summary_out;
    auto* summarize = app.add_subcommand("summarize", "aggregate finished runs into summary tables");
    summarize->add_option("dirs", summary_dirs, "run or campaign directories")->required();
    summarize->add_option("--out", summary_out, "where to write summary.csv and ranks.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto parsed = fedlex::parse_config(config_path);
            apply_overrides(parsed.base, run_overrides, run);
            parsed.base.validate();
            fedlex::RunOptions options;
            options.out_dir = out_dir;
            if (!quiet) {
                std::cout << fedlex::kMetricsHeader << '\n';
                options.on_round = [](const fedlex::RoundMetrics& m) {
                    std::cout << fedlex::format_metrics_row(m) << std::endl;
                };
            }
            fedlex::run_experiment(parsed.base, options);
            return 0;
        }
        if (*campaign) {
            auto parsed = fedlex::parse_config(campaign_config);
            apply_overrides(parsed.base, campaign_overrides, campaign);
            if (!campaign_out.empty()) parsed.output_dir = campaign_out;
            if (workers > 0) parsed.workers = workers;
            const auto result = fedlex::run_campaign(parsed);
            std::size_t failed = 0;
            for (const auto& r : result.runs) failed += r.ok ? 0 : 1;
            std::cout << result.runs.size() << " runs, " << failed << " failed; summary in "
                      << parsed.output_dir.string() << '\n';
            for (const auto& row : result.summary.rows)
                std::cout << row.variant << " [" << row.point << "] " << row.mean_acc << " +- " << row.std_acc
                          << " (rank " << row.rank << ")\n";
            return result.all_ok() ? 0 : 1;
        }
        if (*summarize) {
            std::vector<std::filesystem::path> roots(summary_dirs.begin(), summary_dirs.end());
            const auto summary = fedlex::summarize(roots);
            const std::filesystem::path dest = summary_out.empty() ? roots.front() : std::filesystem::path(summary_out);
            fedlex::write_summary(summary, dest);
            std::cout << "variant,point,mean_acc,std_acc,runs,rank,mean_rank\n";
            for (const auto& r : summary.rows)
                std::cout << r.variant << ",\"" << r.point << "\"," << r.mean_acc << ',' << r.std_acc << ',' << r.runs
                          << ',' << r.rank << ',' << r.mean_rank << '\n';
            for (const auto& p : summary.incomplete) std::cerr << "incomplete: " << p.string() << '\n';
            return 0;
        }
    } catch (const fedlex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
