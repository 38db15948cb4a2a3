#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fedlex/dataset.hpp"
#include "fedlex/mlp.hpp"
#include "fedlex/param_vector.hpp"
#include "fedlex/training.hpp"

namespace fedlex {

// Per-parameter guidance values laid out like the model parameters.
// Raw matrices hold squared exploration deviations (>= 0); normalized ones
// hold values in [0, 1].
struct GuidanceMatrix {
    ParamVector values;
    bool normalized = false;

    static GuidanceMatrix ones_like(const ParamVector& params) {
        return GuidanceMatrix{ParamVector::filled_like(params, 1.0), true};
    }
};

struct ExplorationReport {
    int client_id = 0;
    GuidanceMatrix g_local;  // raw deviations
    int epochs_run = 0;
    double final_train_loss = 0.0;
};

// Squared per-parameter displacement (initial - final)^2.
GuidanceMatrix deviation(const ParamVector& initial, const ParamVector& final_weights);

// Trains a copy of `initial` with plain mini-batch SGD for options.epochs
// epochs on `train` and reports the squared displacement of every
// parameter. Throws DivergenceError carrying the failing epoch.
ExplorationReport explore(const MlpModel& initial, const Dataset& train, const SgdOptions& options,
                          std::uint64_t seed, int client_id);

// Min-max scaling of a raw matrix to [0, 1]: one min and max over the whole
// vector, or one per layout slot when per_layer is set. A constant range maps
// to 1.0.
GuidanceMatrix normalize_local(const GuidanceMatrix& raw, bool per_layer = false);

// Elementwise mean of normalized matrices.
GuidanceMatrix aggregate_global(std::span<const GuidanceMatrix> locals);

// Server-side store of the explorers' normalized matrices and the current
// global matrix.
class GuidanceRegistry {
public:
    void store(int client_id, GuidanceMatrix normalized);
    void set_global(GuidanceMatrix g);

    // Re-aggregates the stored matrices of participating explorers. With no
    // explorer among the participants the previous global matrix is kept.
    const GuidanceMatrix& refresh_global(std::span<const int> participating);

    bool has_global() const noexcept { return global_.has_value(); }
    const GuidanceMatrix& global() const;
    const std::map<int, GuidanceMatrix>& locals() const noexcept { return locals_; }
    bool is_explorer(int client_id) const { return locals_.contains(client_id); }

private:
    std::map<int, GuidanceMatrix> locals_;
    std::optional<GuidanceMatrix> global_;
};

// gradient * max(g, floor), elementwise. g must be normalized and
// 0 <= floor < 1.
ParamVector modulate(const ParamVector& gradient, const GuidanceMatrix& g, double floor = 0.0);
void modulate_in_place(ParamVector& gradient, const GuidanceMatrix& g, double floor = 0.0);

// Writes <stem>.bin (little-endian float64 values) and <stem>.layout.json.
void save_guidance(const std::filesystem::path& stem, const GuidanceMatrix& g);
GuidanceMatrix load_guidance(const std::filesystem::path& stem);

}  // namespace fedlex
