#include "fedlex/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "fedlex/error.hpp"
#include "fedlex/metrics.hpp"
#include "fedlex/orchestrator.hpp"

namespace fedlex {

namespace {

std::string dir_name(const std::string& point) {
    std::string out;
    for (char ch : point) {
        if (ch == '=') out += '-';
        else if (ch == ';') out += '_';
        else if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-') out += ch;
        else out += '_';
    }
    return out;
}

}  // namespace

std::vector<RunSpec> expand(const Campaign& campaign) {
    std::vector<std::string> variants = campaign.variants;
    if (variants.empty()) variants.push_back(campaign.base.variant_name());
    std::vector<std::uint64_t> seeds = campaign.seeds;
    if (seeds.empty()) seeds.push_back(campaign.base.seed);

    // Cartesian product of the sweep axes, first axis outermost.
    std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
    for (const auto& [key, values] : campaign.sweeps) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& p : points)
            for (const auto& v : values) {
                auto q = p;
                q.emplace_back(key, v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }

    std::vector<RunSpec> specs;
    for (const auto& variant : variants) {
        const auto [kind, fedlex] = parse_variant(variant);
        for (const auto& assignment : points) {
            std::string label;
            for (const auto& [k, v] : assignment) label += (label.empty() ? "" : ";") + k + "=" + v;
            if (label.empty()) label = "base";
            for (auto seed : seeds) {
                RunSpec spec;
                spec.variant = variant;
                spec.point = label;
                spec.seed = seed;
                spec.config = campaign.base;
                spec.config.aggregator = kind;
                spec.config.fedlex = fedlex;
                for (const auto& [k, v] : assignment) set_config_value(spec.config, k, v);
                spec.config.seed = seed;
                spec.config.validate();
                spec.dir = campaign.output_dir / variant / dir_name(label) / ("seed_" + std::to_string(seed));
                specs.push_back(std::move(spec));
            }
        }
    }
    return specs;
}

void Campaign::validate() const {
    if (workers < 1) throw ConfigError("workers", "must be at least 1");
    expand(*this);
}

bool CampaignResult::all_ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

CampaignResult run_campaign(const Campaign& campaign) {
    campaign.validate();
    const auto specs = expand(campaign);

    CampaignResult result;
    result.runs.resize(specs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            RunOutcome& outcome = result.runs[i];
            outcome.spec = specs[i];
            try {
                RunOptions options;
                options.out_dir = specs[i].dir;
                options.labels = {{"point", specs[i].point}, {"variant", specs[i].variant}};
                run_experiment(specs[i].config, options);
                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.error = e.what();
                std::lock_guard lock(log_mutex);
                std::cerr << "run " << specs[i].dir.string() << " failed: " << e.what() << '\n';
            }
        }
    };

    const auto n_workers = static_cast<std::size_t>(std::max(1, campaign.workers));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(n_workers, specs.size()); ++w) pool.emplace_back(worker);
    }

    result.summary = summarize({campaign.output_dir});
    write_summary(result.summary, campaign.output_dir);
    return result;
}

std::vector<double> average_ranks(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(scores.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

Summary summarize(const std::vector<std::filesystem::path>& roots) {
    namespace fs = std::filesystem;
    std::set<fs::path> run_dirs;
    for (const auto& root : roots) {
        if (!fs::exists(root)) throw InvalidInput("summarize: no such directory " + root.string());
        if (fs::exists(root / "manifest.json")) run_dirs.insert(root);
        if (!fs::is_directory(root)) continue;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
                run_dirs.insert(entry.path().parent_path());
    }

    Summary summary;
    std::map<std::pair<std::string, std::string>, std::vector<double>> finals;
    for (const auto& dir : run_dirs) {
        try {
            const auto info = read_manifest(dir / "manifest.json");
            const auto rows = read_metrics_csv(dir / "metrics.csv");
            if (rows.empty() || rows.back().round < 1) throw FormatError("no training rounds");
            const std::string point = info.labels.contains("point") ? info.labels.at("point") : "base";
            finals[{info.variant, point}].push_back(rows.back().mean_acc);
        } catch (const std::exception&) {
            summary.incomplete.push_back(dir);
        }
    }

    for (const auto& [key, values] : finals) {
        SummaryRow row;
        row.variant = key.first;
        row.point = key.second;
        row.runs = values.size();
        row.mean_acc = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - row.mean_acc) * (v - row.mean_acc);
        row.std_acc = std::sqrt(ss / static_cast<double>(values.size()));
        summary.rows.push_back(row);
    }

    // Rank variants within each config point, then average per variant.
    std::map<std::string, std::vector<std::size_t>> by_point;
    for (std::size_t i = 0; i < summary.rows.size(); ++i) by_point[summary.rows[i].point].push_back(i);
    std::map<std::string, std::vector<double>> ranks_of;
    for (const auto& [point, idx] : by_point) {
        std::vector<double> scores;
        for (auto i : idx) scores.push_back(summary.rows[i].mean_acc);
        const auto ranks = average_ranks(scores);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            summary.rows[idx[t]].rank = ranks[t];
            ranks_of[summary.rows[idx[t]].variant].push_back(ranks[t]);
        }
    }
    for (const auto& [variant, ranks] : ranks_of) {
        const double mean = std::accumulate(ranks.begin(), ranks.end(), 0.0) / static_cast<double>(ranks.size());
        summary.mean_ranks.emplace_back(variant, mean);
    }
    for (auto& row : summary.rows)
        for (const auto& [variant, mean] : summary.mean_ranks)
            if (variant == row.variant) row.mean_rank = mean;
    return summary;
}

void write_summary(const Summary& summary, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream rows(dir / "summary.csv");
    if (!rows) throw FormatError("cannot write " + (dir / "summary.csv").string());
    rows << "variant,point,mean_acc,std_acc,runs,rank,mean_rank\n";
    for (const auto& r : summary.rows)
        rows << r.variant << ",\"" << r.point << "\"," << format_double(r.mean_acc) << ',' << format_double(r.std_acc)
             << ',' << r.runs << ',' << format_double(r.rank) << ',' << format_double(r.mean_rank) << '\n';

    std::ofstream ranks(dir / "ranks.csv");
    if (!ranks) throw FormatError("cannot write " + (dir / "ranks.csv").string());
    ranks << "variant,mean_rank\n";
    for (const auto& [variant, mean] : summary.mean_ranks) ranks << variant << ',' << format_double(mean) << '\n';

    if (!summary.incomplete.empty()) {
        std::ofstream inc(dir / "incomplete.txt");
        for (const auto& p : summary.incomplete) inc << p.string() << '\n';
    }
}

}  // namespace fedlex
