#include "fedlex/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "fedlex/error.hpp"
#include "fedlex/random.hpp"

namespace fedlex {

GuidanceMatrix deviation(const ParamVector& initial, const ParamVector& final_weights) {
    require_same_layout(initial, final_weights, "deviation");
    GuidanceMatrix g{ParamVector::zeros_like(initial), false};
    for (std::size_t i = 0; i < initial.size(); ++i) {
        const double d = initial[i] - final_weights[i];
        g.values[i] = d * d;
    }
    return g;
}

ExplorationReport explore(const MlpModel& initial, const Dataset& train, const SgdOptions& options,
                          std::uint64_t seed, int client_id) {
    if (options.epochs < 1) throw ConfigError("exploration_epochs", "must be at least 1");
    MlpModel probe = initial;
    auto rng = make_rng(seed, Stream::Exploration, {static_cast<std::uint64_t>(client_id)});
    const TrainResult run = train_sgd(probe, train, options, rng);

    ExplorationReport report;
    report.client_id = client_id;
    report.g_local = deviation(initial.params(), probe.params());
    report.epochs_run = run.epochs_run;
    report.final_train_loss = run.last_epoch_loss;
    return report;
}

namespace {

void min_max_scale(std::span<const double> in, std::span<double> out) {
    if (in.empty()) return;
    const auto [lo_it, hi_it] = std::minmax_element(in.begin(), in.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) {
        std::fill(out.begin(), out.end(), 1.0);
        return;
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp((in[i] - lo) / range, 0.0, 1.0);
}

}  // namespace

GuidanceMatrix normalize_local(const GuidanceMatrix& raw, bool per_layer) {
    if (raw.normalized) throw ContractViolation("normalize_local: matrix is already normalized");
    for (double v : raw.values.values())
        if (!(v >= 0.0)) throw ContractViolation("normalize_local: raw deviations must be non-negative");

    GuidanceMatrix out{ParamVector::zeros_like(raw.values), true};
    if (per_layer) {
        for (std::size_t s = 0; s < raw.values.layout().slots().size(); ++s)
            min_max_scale(raw.values.slot(s), out.values.slot(s));
    } else {
        min_max_scale(raw.values.values(), out.values.values());
    }
    return out;
}

GuidanceMatrix aggregate_global(std::span<const GuidanceMatrix> locals) {
    if (locals.empty()) throw InvalidInput("aggregate_global: no local guidance matrices");
    for (const auto& g : locals) {
        if (!g.normalized) throw ContractViolation("aggregate_global: inputs must be normalized");
        require_same_layout(locals.front().values, g.values, "aggregate_global");
    }
    GuidanceMatrix out{ParamVector::zeros_like(locals.front().values), true};
    for (const auto& g : locals) add_scaled(out.values, g.values, 1.0);
    const double inv = 1.0 / static_cast<double>(locals.size());
    for (double& v : out.values.values()) v = std::clamp(v * inv, 0.0, 1.0);
    return out;
}

void GuidanceRegistry::store(int client_id, GuidanceMatrix normalized) {
    if (!normalized.normalized) throw ContractViolation("GuidanceRegistry::store: matrix must be normalized");
    locals_.insert_or_assign(client_id, std::move(normalized));
}

void GuidanceRegistry::set_global(GuidanceMatrix g) {
    if (!g.normalized) throw ContractViolation("GuidanceRegistry::set_global: matrix must be normalized");
    global_ = std::move(g);
}

const GuidanceMatrix& GuidanceRegistry::global() const {
    if (!global_) throw ContractViolation("GuidanceRegistry: no global guidance yet");
    return *global_;
}

const GuidanceMatrix& GuidanceRegistry::refresh_global(std::span<const int> participating) {
    std::vector<int> ids(participating.begin(), participating.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::vector<GuidanceMatrix> selected;
    for (int id : ids)
        if (auto it = locals_.find(id); it != locals_.end()) selected.push_back(it->second);
    if (!selected.empty()) global_ = aggregate_global(selected);
    return global();
}

void modulate_in_place(ParamVector& gradient, const GuidanceMatrix& g, double floor) {
    if (!g.normalized) throw ContractViolation("modulate: guidance matrix must be normalized");
    if (!(floor >= 0.0 && floor < 1.0)) throw ContractViolation("modulate: floor must lie in [0, 1)");
    require_same_layout(gradient, g.values, "modulate");
    auto grad = gradient.values();
    auto gv = g.values.values();
    if (floor == 0.0) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= gv[i];
    } else {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= std::max(gv[i], floor);
    }
}

ParamVector modulate(const ParamVector& gradient, const GuidanceMatrix& g, double floor) {
    ParamVector out = gradient;
    modulate_in_place(out, g, floor);
    return out;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void save_guidance(const std::filesystem::path& stem, const GuidanceMatrix& g) {
    std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
    if (!bin) throw FormatError("cannot write " + with_suffix(stem, ".bin").string());
    for (double v : g.values.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
        bin.write(bytes, 8);
    }

    nlohmann::json layout;
    layout["dtype"] = "float64-le";
    layout["normalized"] = g.normalized;
    layout["count"] = g.values.size();
    layout["slots"] = nlohmann::json::array();
    for (const auto& s : g.values.layout().slots())
        layout["slots"].push_back({{"name", s.name}, {"offset", s.offset}, {"shape", s.shape}});
    std::ofstream side(with_suffix(stem, ".layout.json"));
    if (!side) throw FormatError("cannot write " + with_suffix(stem, ".layout.json").string());
    side << layout.dump(2) << '\n';
}

GuidanceMatrix load_guidance(const std::filesystem::path& stem) {
    std::ifstream side(with_suffix(stem, ".layout.json"));
    if (!side) throw FormatError("cannot open " + with_suffix(stem, ".layout.json").string());
    nlohmann::json layout;
    try {
        layout = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("guidance layout: ") + e.what());
    }
    std::vector<LayerSlot> slots;
    for (const auto& s : layout.at("slots"))
        slots.push_back({s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                         s.at("shape").get<std::vector<std::size_t>>()});
    auto lay = std::make_shared<const Layout>(std::move(slots));

    std::ifstream bin(with_suffix(stem, ".bin"), std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (bytes.size() != lay->total() * 8) throw FormatError("guidance values do not match the layout size");
    std::vector<double> values(lay->total());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= std::uint64_t{static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])} << (8 * b);
        std::memcpy(&values[i], &bits, sizeof bits);
    }
    return GuidanceMatrix{ParamVector(lay, std::move(values)), layout.at("normalized").get<bool>()};
}

}  // namespace fedlex
