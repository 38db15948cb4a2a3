#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "fedlex/matrix.hpp"
#include "fedlex/mlp.hpp"

namespace fedlex {

// n samples of d features; every label < classes.
struct Dataset {
    Matrix inputs;
    std::vector<int> labels;
    int classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return inputs.cols; }

    // Rows at the given indices, in that order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
    Batch batch(const std::vector<std::size_t>& indices) const;
    Batch as_batch() const { return Batch{inputs, labels}; }

    // Per-class sample counts.
    std::vector<std::size_t> histogram() const;
};

// Gaussian clusters with identity covariance. Class means sit at
// separation * e_k when classes <= dim (pairwise distance separation*sqrt(2)),
// otherwise at separation * (random unit vector). Pure in seed.
Dataset gen_synthetic(int classes, std::size_t dim, std::size_t per_class, double separation, std::uint64_t seed);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct ClientShard {
    int client_id = 0;
    Dataset train;
    Dataset test;
    // Positions in the source dataset, for provenance checks.
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

enum class PartitionScheme { Pathological, Dirichlet };

PartitionScheme parse_partition_scheme(std::string_view name);
std::string_view to_string(PartitionScheme s);

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::Pathological;
    int classes_per_client = 2;
    double alpha = 0.5;
    int clients = 1;
    std::uint64_t seed = 0;
    // Dirichlet repair target: undersized clients are topped up, one sample
    // at a time, from the currently largest client.
    std::size_t min_samples = 5;
};

void validate(const PartitionSpec& spec, const Dataset& ds);

// Index allocations (one list per client) before the train/test split.
std::vector<std::vector<std::size_t>> allocate_pathological(const Dataset& ds, const PartitionSpec& spec);
std::vector<std::vector<std::size_t>> allocate_dirichlet(const Dataset& ds, const PartitionSpec& spec);

std::vector<ClientShard> partition_pathological(const Dataset& ds, const PartitionSpec& spec);
std::vector<ClientShard> partition_dirichlet(const Dataset& ds, const PartitionSpec& spec);
std::vector<ClientShard> partition(const Dataset& ds, const PartitionSpec& spec);

// 80/20 split of one client's allocation (indices into ds). Labels with at
// least five samples are split proportionally, the rest are mixed randomly.
ClientShard split_train_test(const Dataset& ds, const std::vector<std::size_t>& allocation, int client_id,
                             std::uint64_t seed);

// Number of test samples for an allocation of n samples.
std::size_t test_count(std::size_t n);

}  // namespace fedlex
