#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedlex/aggregation.hpp"
#include "fedlex/dataset.hpp"
#include "fedlex/mlp.hpp"

namespace fedlex {

// How explorer participation is given: an absolute client count, or a
// fraction of all clients. "20" is a count, "0.25" / "1.0" are fractions.
struct ExplorerSpec {
    double value = 20.0;
    bool fraction = false;

    int resolve(int clients) const;
    std::string to_string() const;
    static ExplorerSpec parse(const std::string& text);
};

// When guidance is applied: to every local gradient step, or once to the
// finished local delta.
enum class DeltaMode { PerStep, Once };

// `ones` skips exploration and uses an all-ones guidance matrix, which must
// reproduce the base aggregator exactly.
enum class GuidanceOverride { None, Ones };

enum class DataSource { Synthetic, Idx };

struct RoundConfig {
    // protocol
    int rounds = 500;
    std::size_t batch_size = 50;
    int local_epochs = 1;
    int clients = 20;
    int clients_per_round = 5;
    ExplorerSpec explorers{};
    int exploration_epochs = 150;
    double learning_rate = 3e-4;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    bool early_stop = false;

    // aggregation
    AggregatorKind aggregator = AggregatorKind::AvgM;
    bool fedlex = true;
    std::optional<double> server_lr;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double prox_mu = 0.01;

    // guidance
    double guidance_floor = 0.0;
    bool per_layer_norm = false;
    DeltaMode delta_mode = DeltaMode::PerStep;
    GuidanceOverride guidance_override = GuidanceOverride::None;

    // model
    std::vector<std::size_t> hidden{64};
    Activation activation = Activation::Relu;

    // data
    DataSource dataset = DataSource::Synthetic;
    int classes = 10;
    std::size_t dim = 32;
    std::size_t per_class = 200;
    double separation = 3.0;
    std::string idx_images;
    std::string idx_labels;
    PartitionScheme partition = PartitionScheme::Pathological;
    int classes_per_client = 2;
    double alpha = 0.5;

    int resolved_explorers() const { return explorers.resolve(clients); }
    AggregatorHyper hyper() const;
    std::string variant_name() const;

    // Throws ConfigError naming the first offending key.
    void validate() const;
};

// "FedAvgM", "FedLExProx", ...
std::string variant_name(AggregatorKind kind, bool fedlex);
std::pair<AggregatorKind, bool> parse_variant(const std::string& name);

// Sets one key (canonical name or short alias) from its textual value.
void set_config_value(RoundConfig& cfg, const std::string& key, const std::string& value);

// Every key with its canonical textual value, in a fixed order. Feeding the
// result back through set_config_value reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> to_key_values(const RoundConfig& cfg);

std::vector<std::string> config_keys();
bool is_config_key(const std::string& key);

// Canonical "key: value" text and its git-blob style SHA-1.
std::string canonical_text(const RoundConfig& cfg);
std::string content_hash(const std::string& text);

// A multi-run experiment: variants x sweep grid x seeds.
struct Campaign {
    RoundConfig base;
    std::vector<std::string> variants;                                      // empty: base variant only
    std::vector<std::uint64_t> seeds;                                       // empty: base seed only
    std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;  // key -> values, in file order
    std::filesystem::path output_dir = "campaign_output";
    int workers = 1;

    void validate() const;
};

// Parses a flat key-value document (or a run manifest JSON). Unset keys
// take their defaults; unknown keys are errors.
Campaign parse_config(const std::filesystem::path& path);
Campaign parse_config_text(const std::string& text);

std::string format_double(double v);

}  // namespace fedlex
