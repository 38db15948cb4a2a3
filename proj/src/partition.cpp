#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fedlex/dataset.hpp"
#include "fedlex/error.hpp"
#include "fedlex/random.hpp"

namespace fedlex {

PartitionScheme parse_partition_scheme(std::string_view name) {
    if (name == "pathological") return PartitionScheme::Pathological;
    if (name == "dirichlet") return PartitionScheme::Dirichlet;
    throw ConfigError("partition", "expected pathological or dirichlet, got '" + std::string(name) + "'");
}

std::string_view to_string(PartitionScheme s) {
    return s == PartitionScheme::Pathological ? "pathological" : "dirichlet";
}

void validate(const PartitionSpec& spec, const Dataset& ds) {
    if (spec.clients < 1) throw ConfigError("clients", "must be at least 1");
    if (ds.size() < static_cast<std::size_t>(ds.classes))
        throw ConfigError("dataset", "needs at least one sample per class");
    if (spec.scheme == PartitionScheme::Pathological) {
        if (spec.classes_per_client < 1) throw ConfigError("classes_per_client", "must be at least 1");
        if (spec.classes_per_client > ds.classes)
            throw ConfigError("classes_per_client", "cannot exceed the number of classes");
        const auto shards = static_cast<std::size_t>(spec.clients) * static_cast<std::size_t>(spec.classes_per_client);
        if (shards < static_cast<std::size_t>(ds.classes))
            throw ConfigError("classes_per_client", "clients * classes_per_client must be >= classes");
        if (shards > ds.size())
            throw ConfigError("clients", "more shards requested (" + std::to_string(shards) + ") than samples");
    } else {
        if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) throw ConfigError("alpha", "must be positive");
        if (spec.min_samples * static_cast<std::size_t>(spec.clients) > ds.size())
            throw ConfigError("clients", "not enough samples to give every client the minimum allocation");
    }
}

namespace {

// Splits `total` into parts proportional to `weights` (which sum to > 0),
// handing leftover units to the largest fractional parts, lowest index first
// on ties.
std::vector<std::size_t> largest_remainder(const std::vector<double>& weights, std::size_t total) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] / sum * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        frac.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[frac[i % frac.size()].second];
    return counts;
}

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds, std::mt19937_64& rng) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.classes));
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    for (auto& idx : by_class) shuffle_in_place(idx, rng);
    return by_class;
}

}  // namespace

std::vector<std::vector<std::size_t>> allocate_pathological(const Dataset& ds, const PartitionSpec& spec) {
    validate(spec, ds);
    auto rng = make_rng(spec.seed, Stream::Partition);
    const auto clients = static_cast<std::size_t>(spec.clients);
    const std::size_t total_shards = clients * static_cast<std::size_t>(spec.classes_per_client);

    // Sort by label (classes in a seeded order, samples shuffled within a
    // class), then cut each class into its share of the shards so no shard
    // straddles two labels.
    auto by_class = indices_by_class(ds, rng);
    std::vector<std::size_t> class_order(by_class.size());
    std::iota(class_order.begin(), class_order.end(), 0);
    shuffle_in_place(class_order, rng);

    std::vector<std::size_t> present;
    std::vector<double> weights;
    for (auto c : class_order) {
        if (by_class[c].empty()) continue;
        present.push_back(c);
        weights.push_back(static_cast<double>(by_class[c].size()));
    }
    if (present.size() > total_shards)
        throw ConfigError("classes_per_client", "not enough shards to cover every class");

    // Every present class gets at least one shard, the rest proportionally.
    std::vector<std::size_t> shards_per_class(present.size(), 1);
    {
        const auto extra = largest_remainder(weights, total_shards - present.size());
        for (std::size_t i = 0; i < present.size(); ++i) shards_per_class[i] += extra[i];
        // A class cannot be cut into more shards than it has samples; move the
        // excess to the classes with the most samples per shard.
        for (std::size_t i = 0; i < present.size(); ++i) {
            while (shards_per_class[i] > by_class[present[i]].size()) {
                --shards_per_class[i];
                std::size_t best = 0;
                double best_ratio = -1.0;
                for (std::size_t j = 0; j < present.size(); ++j) {
                    if (shards_per_class[j] >= by_class[present[j]].size()) continue;
                    const double ratio = static_cast<double>(by_class[present[j]].size()) /
                                         static_cast<double>(shards_per_class[j]);
                    if (ratio > best_ratio) {
                        best_ratio = ratio;
                        best = j;
                    }
                }
                ++shards_per_class[best];
            }
        }
    }

    std::vector<std::vector<std::size_t>> shards;
    shards.reserve(total_shards);
    for (std::size_t i = 0; i < present.size(); ++i) {
        const auto& idx = by_class[present[i]];
        const std::size_t k = shards_per_class[i];
        const std::size_t base = idx.size() / k;
        const std::size_t rem = idx.size() % k;
        std::size_t pos = 0;
        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t len = base + (s < rem ? 1 : 0);
            shards.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
            pos += len;
        }
    }

    // Deal round-robin: shards of one class are consecutive, so as long as a
    // class has at most `clients` shards no client receives it twice.
    std::vector<std::vector<std::size_t>> allocations(clients);
    for (std::size_t s = 0; s < shards.size(); ++s) {
        auto& dst = allocations[s % clients];
        dst.insert(dst.end(), shards[s].begin(), shards[s].end());
    }
    for (auto& a : allocations) std::sort(a.begin(), a.end());
    return allocations;
}

std::vector<std::vector<std::size_t>> allocate_dirichlet(const Dataset& ds, const PartitionSpec& spec) {
    validate(spec, ds);
    auto rng = make_rng(spec.seed, Stream::Partition);
    const auto clients = static_cast<std::size_t>(spec.clients);
    auto by_class = indices_by_class(ds, rng);

    std::vector<std::vector<std::size_t>> allocations(clients);
    std::gamma_distribution<double> gamma(spec.alpha, 1.0);
    for (const auto& idx : by_class) {
        if (idx.empty()) continue;
        std::vector<double> p(clients);
        double sum = 0.0;
        for (auto& v : p) {
            v = gamma(rng);
            sum += v;
        }
        if (!(sum > 0.0)) {
            // Every gamma draw underflowed: the alpha -> 0 limit puts the
            // whole class on one client.
            std::fill(p.begin(), p.end(), 0.0);
            p[static_cast<std::size_t>(rng() % clients)] = 1.0;
        }
        const auto counts = largest_remainder(p, idx.size());
        std::size_t pos = 0;
        for (std::size_t c = 0; c < clients; ++c) {
            allocations[c].insert(allocations[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                  idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[c]));
            pos += counts[c];
        }
    }

    // Top up undersized clients from the largest one (lowest id on ties).
    for (std::size_t c = 0; c < clients; ++c) {
        while (allocations[c].size() < spec.min_samples) {
            std::size_t donor = 0;
            for (std::size_t d = 1; d < clients; ++d)
                if (allocations[d].size() > allocations[donor].size()) donor = d;
            allocations[c].push_back(allocations[donor].back());
            allocations[donor].pop_back();
        }
    }
    for (auto& a : allocations) std::sort(a.begin(), a.end());
    return allocations;
}

std::size_t test_count(std::size_t n) { return (n + 2) / 5; }

ClientShard split_train_test(const Dataset& ds, const std::vector<std::size_t>& allocation, int client_id,
                             std::uint64_t seed) {
    if (allocation.size() < 5)
        throw InvalidInput("client " + std::to_string(client_id) + ": shard too small to split (" +
                           std::to_string(allocation.size()) + " < 5 samples)");
    auto rng = make_rng(seed, Stream::Split, {static_cast<std::uint64_t>(client_id)});

    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(ds.classes));
    for (auto i : allocation) by_label[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    // Labels with >= 5 samples first, grouped by label; the rest pooled and
    // mixed at the end. Systematic selection over this ordering yields a
    // per-label 80/20 split for the first group.
    std::vector<std::size_t> ordered;
    std::vector<std::size_t> pooled;
    for (auto& idx : by_label) {
        shuffle_in_place(idx, rng);
        auto& dst = idx.size() >= 5 ? ordered : pooled;
        dst.insert(dst.end(), idx.begin(), idx.end());
    }
    shuffle_in_place(pooled, rng);
    ordered.insert(ordered.end(), pooled.begin(), pooled.end());

    const std::size_t n = ordered.size();
    const std::size_t t = test_count(n);
    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < t; ++i) is_test[(2 * i + 1) * n / (2 * t)] = true;

    ClientShard shard;
    shard.client_id = client_id;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? shard.test_indices : shard.train_indices).push_back(ordered[i]);
    shard.train = ds.subset(shard.train_indices);
    shard.test = ds.subset(shard.test_indices);
    return shard;
}

namespace {

std::vector<ClientShard> split_all(const Dataset& ds, const std::vector<std::vector<std::size_t>>& allocations,
                                   std::uint64_t seed) {
    std::vector<ClientShard> shards;
    shards.reserve(allocations.size());
    for (std::size_t c = 0; c < allocations.size(); ++c)
        shards.push_back(split_train_test(ds, allocations[c], static_cast<int>(c), seed));
    return shards;
}

}  // namespace

std::vector<ClientShard> partition_pathological(const Dataset& ds, const PartitionSpec& spec) {
    if (spec.scheme != PartitionScheme::Pathological)
        throw ContractViolation("partition_pathological called with a non-pathological spec");
    return split_all(ds, allocate_pathological(ds, spec), spec.seed);
}

std::vector<ClientShard> partition_dirichlet(const Dataset& ds, const PartitionSpec& spec) {
    if (spec.scheme != PartitionScheme::Dirichlet)
        throw ContractViolation("partition_dirichlet called with a non-dirichlet spec");
    return split_all(ds, allocate_dirichlet(ds, spec), spec.seed);
}

std::vector<ClientShard> partition(const Dataset& ds, const PartitionSpec& spec) {
    return spec.scheme == PartitionScheme::Pathological ? partition_pathological(ds, spec)
                                                        : partition_dirichlet(ds, spec);
}

}  // namespace fedlex
