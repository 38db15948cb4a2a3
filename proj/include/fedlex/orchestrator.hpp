#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedlex/aggregation.hpp"
#include "fedlex/config.hpp"
#include "fedlex/dataset.hpp"
#include "fedlex/guidance.hpp"
#include "fedlex/mlp.hpp"

namespace fedlex {

struct ClientState {
    int id = 0;
    ClientShard shard;
    ParamVector weights;
};

struct ServerState {
    ParamVector global_weights;
    GuidanceRegistry guidance;
    AggregatorState aggregator;
    std::vector<int> explorers;  // ids chosen for exploration, ascending
    int round = 0;
    bool explored = false;
};

struct RoundMetrics {
    int round = 0;
    double mean_acc = 0.0;    // mean over all clients' test sets, percent
    double std_acc = 0.0;     // population std of the same, percent
    double pooled_acc = 0.0;  // global model on the union of test sets, percent
    double sigma2_dw = 0.0;   // variance across the transmitted payloads
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::vector<int> participants;
    std::vector<double> client_train_loss;  // aligned with participants; NaN if dropped
    std::vector<int> dropped;
};

constexpr std::uint64_t kBytesPerValue = sizeof(double);

// One simulated federation: data, clients and server for a single config.
class Simulation {
public:
    explicit Simulation(RoundConfig cfg);

    const RoundConfig& config() const noexcept { return cfg_; }
    const ServerState& server() const noexcept { return server_; }
    const std::vector<ClientState>& clients() const noexcept { return clients_; }
    std::size_t param_count() const noexcept { return server_.global_weights.size(); }

    // Selects the explorers, runs their exploration and builds the initial
    // global guidance. Global weights are left untouched.
    RoundMetrics run_exploration_round();

    // One training round; exploration must have happened first for FedLEx
    // variants (unless guidance is overridden).
    RoundMetrics run_round();

    // Explorer ids for this config's seed.
    std::vector<int> select_explorers() const;
    // Uniform sample of K distinct client ids for round r, ascending.
    std::vector<int> sample_clients(int round) const;

    const GuidanceMatrix* current_guidance() const;

    // Test accuracies of the current global model.
    void evaluate(RoundMetrics& m) const;

private:
    bool uses_guidance() const { return cfg_.fedlex; }
    bool exploring() const { return cfg_.fedlex && cfg_.guidance_override == GuidanceOverride::None; }

    ClientUpdate train_client(const ClientState& client, int round, const GuidanceMatrix* g, double& train_loss) const;

    RoundConfig cfg_;
    std::vector<std::size_t> layer_sizes_;
    std::vector<ClientState> clients_;
    ServerState server_;
    std::optional<GuidanceMatrix> ones_;
    Matrix pooled_inputs_;
    std::vector<int> pooled_labels_;
};

Dataset build_dataset(const RoundConfig& cfg);

// Receives each round's metrics as soon as it is computed.
using MetricsCallback = std::function<void(const RoundMetrics&)>;

struct RunOptions {
    // When set: metrics.csv (streamed per round), manifest.json and, for
    // explored runs, the initial global guidance matrix land here.
    std::optional<std::filesystem::path> out_dir;
    // Extra string fields recorded in the manifest (variant point, ...).
    std::map<std::string, std::string> labels;
    MetricsCallback on_round;
};

// Runs exploration (FedLEx variants) and up to cfg.rounds training rounds,
// stopping early on a pooled-accuracy plateau when cfg.early_stop is set.
std::vector<RoundMetrics> run_experiment(const RoundConfig& cfg, const RunOptions& options = {});

}  // namespace fedlex
