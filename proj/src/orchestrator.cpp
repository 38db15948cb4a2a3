#include "fedlex/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "fedlex/error.hpp"
#include "fedlex/metrics.hpp"
#include "fedlex/random.hpp"
#include "fedlex/training.hpp"

namespace fedlex {

Dataset build_dataset(const RoundConfig& cfg) {
    if (cfg.dataset == DataSource::Idx) return load_idx(cfg.idx_images, cfg.idx_labels);
    return gen_synthetic(cfg.classes, cfg.dim, cfg.per_class, cfg.separation, cfg.seed);
}

namespace {

std::vector<int> choose_without_replacement(int population, int count, std::mt19937_64 rng) {
    std::vector<int> ids(static_cast<std::size_t>(population));
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < count; ++i) {
        const auto remaining = static_cast<std::uint64_t>(population - i);
        const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng() % remaining);
        std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(count));
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

Simulation::Simulation(RoundConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const Dataset ds = build_dataset(cfg_);

    layer_sizes_.push_back(ds.dim());
    layer_sizes_.insert(layer_sizes_.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    layer_sizes_.push_back(static_cast<std::size_t>(ds.classes));

    PartitionSpec spec;
    spec.scheme = cfg_.partition;
    spec.classes_per_client = cfg_.classes_per_client;
    spec.alpha = cfg_.alpha;
    spec.clients = cfg_.clients;
    spec.seed = cfg_.seed;
    auto shards = partition(ds, spec);

    server_.global_weights = init_params(layer_sizes_, cfg_.seed);
    server_.aggregator = AggregatorState::make(cfg_.aggregator, cfg_.hyper(), server_.global_weights);

    std::size_t pooled_rows = 0;
    for (const auto& s : shards) pooled_rows += s.test.size();
    pooled_inputs_ = Matrix(pooled_rows, ds.dim());
    std::size_t row = 0;
    for (auto& s : shards) {
        std::copy(s.test.inputs.data.begin(), s.test.inputs.data.end(),
                  pooled_inputs_.data.begin() + static_cast<std::ptrdiff_t>(row * ds.dim()));
        row += s.test.size();
        pooled_labels_.insert(pooled_labels_.end(), s.test.labels.begin(), s.test.labels.end());
        ClientState client;
        client.id = s.client_id;
        client.shard = std::move(s);
        client.weights = server_.global_weights;
        clients_.push_back(std::move(client));
    }

    if (cfg_.fedlex && cfg_.guidance_override == GuidanceOverride::Ones)
        ones_ = GuidanceMatrix::ones_like(server_.global_weights);
}

std::vector<int> Simulation::select_explorers() const {
    return choose_without_replacement(cfg_.clients, cfg_.resolved_explorers(), make_rng(cfg_.seed, Stream::Explorers));
}

std::vector<int> Simulation::sample_clients(int round) const {
    return choose_without_replacement(cfg_.clients, cfg_.clients_per_round,
                                      make_rng(cfg_.seed, Stream::Sampling, {static_cast<std::uint64_t>(round)}));
}

const GuidanceMatrix* Simulation::current_guidance() const {
    if (!cfg_.fedlex) return nullptr;
    if (ones_) return &*ones_;
    return server_.guidance.has_global() ? &server_.guidance.global() : nullptr;
}

void Simulation::evaluate(RoundMetrics& m) const {
    const MlpModel global(layer_sizes_, cfg_.activation, server_.global_weights);
    std::vector<double> accs;
    accs.reserve(clients_.size());
    for (const auto& c : clients_)
        accs.push_back(100.0 * accuracy(global, c.shard.test.inputs, c.shard.test.labels));
    const double n = static_cast<double>(accs.size());
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : accs) ss += (a - mean) * (a - mean);
    m.mean_acc = mean;
    m.std_acc = std::sqrt(ss / n);
    m.pooled_acc = 100.0 * accuracy(global, pooled_inputs_, pooled_labels_);
}

RoundMetrics Simulation::run_exploration_round() {
    if (!exploring()) throw ContractViolation("exploration runs only for FedLEx variants without a guidance override");
    if (server_.explored) throw ContractViolation("exploration round already completed");
    if (server_.round != 0) throw ContractViolation("exploration must precede the first training round");

    const std::vector<int> explorers = select_explorers();
    const MlpModel initial(layer_sizes_, cfg_.activation, server_.global_weights);
    SgdOptions options;
    options.epochs = cfg_.exploration_epochs;
    options.batch_size = cfg_.batch_size;
    options.learning_rate = cfg_.learning_rate;
    options.weight_decay = cfg_.weight_decay;

    RoundMetrics m;
    m.round = 0;
    m.participants = explorers;
    for (int id : explorers) {
        try {
            const auto report = explore(initial, clients_[static_cast<std::size_t>(id)].shard.train, options,
                                        cfg_.seed, id);
            server_.guidance.store(id, normalize_local(report.g_local, cfg_.per_layer_norm));
            m.client_train_loss.push_back(report.final_train_loss);
        } catch (const DivergenceError& e) {
            std::cerr << "explorer " << id << " diverged: " << e.what() << '\n';
            m.client_train_loss.push_back(std::numeric_limits<double>::quiet_NaN());
            m.dropped.push_back(id);
        }
    }
    if (server_.guidance.locals().empty())
        throw ConfigError("learning_rate", "every explorer diverged during exploration");

    std::vector<GuidanceMatrix> locals;
    for (const auto& [id, g] : server_.guidance.locals()) locals.push_back(g);
    server_.guidance.set_global(aggregate_global(locals));
    server_.explorers = explorers;
    server_.explored = true;

    const std::uint64_t m_params = param_count();
    m.bytes_down = explorers.size() * m_params * kBytesPerValue;
    m.bytes_up = server_.guidance.locals().size() * m_params * kBytesPerValue;
    m.sigma2_dw = 0.0;
    evaluate(m);
    return m;
}

ClientUpdate Simulation::train_client(const ClientState& client, int round, const GuidanceMatrix* g,
                                      double& train_loss) const {
    const ParamVector& global = server_.global_weights;
    MlpModel model(layer_sizes_, cfg_.activation, global);
    const Dataset& train = client.shard.train;

    ClientUpdate update;
    update.client_id = client.id;
    update.num_samples = train.size();

    if (cfg_.aggregator == AggregatorKind::Sgd) {
        // One full-batch gradient at the broadcast weights.
        const auto fwd = full_batch_loss(model, train);
        if (!std::isfinite(fwd.loss)) throw DivergenceError(0, "client gradient is not finite");
        ParamVector grad = backward(model, fwd.cache);
        if (cfg_.weight_decay != 0.0) add_scaled(grad, model.params(), cfg_.weight_decay);
        if (g) modulate_in_place(grad, *g, cfg_.guidance_floor);
        train_loss = fwd.loss;
        update.payload = std::move(grad);
        return update;
    }

    SgdOptions options;
    options.epochs = cfg_.local_epochs;
    options.batch_size = cfg_.batch_size;
    options.learning_rate = cfg_.learning_rate;
    options.weight_decay = cfg_.weight_decay;

    const bool prox = cfg_.aggregator == AggregatorKind::Prox;
    const bool per_step = g && cfg_.delta_mode == DeltaMode::PerStep;
    GradientHook hook;
    if (prox || per_step) {
        hook = [&](ParamVector& grad, const ParamVector& w) {
            if (prox) add_prox_term(grad, w, global, cfg_.prox_mu);
            if (per_step) modulate_in_place(grad, *g, cfg_.guidance_floor);
        };
    }

    auto rng = make_rng(cfg_.seed, Stream::LocalTraining,
                        {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client.id)});
    const TrainResult result = train_sgd(model, train, options, rng, hook);
    train_loss = result.last_epoch_loss;

    ParamVector delta = subtract(model.params(), global);
    if (g && cfg_.delta_mode == DeltaMode::Once) modulate_in_place(delta, *g, cfg_.guidance_floor);
    update.payload = std::move(delta);
    return update;
}

RoundMetrics Simulation::run_round() {
    if (exploring() && !server_.explored) throw ContractViolation("run_round: exploration round has not run");
    const int round = ++server_.round;

    RoundMetrics m;
    m.round = round;
    m.participants = sample_clients(round);

    const GuidanceMatrix* g = nullptr;
    if (cfg_.fedlex) g = ones_ ? &*ones_ : &server_.guidance.refresh_global(m.participants);

    std::vector<ClientUpdate> updates;
    for (int id : m.participants) {
        double loss = std::numeric_limits<double>::quiet_NaN();
        try {
            updates.push_back(train_client(clients_[static_cast<std::size_t>(id)], round, g, loss));
        } catch (const DivergenceError& e) {
            std::cerr << "round " << round << ": client " << id << " dropped: " << e.what() << '\n';
            m.dropped.push_back(id);
        }
        m.client_train_loss.push_back(loss);
    }
    if (updates.empty()) throw Error("round " + std::to_string(round) + ": every client update diverged");

    const std::uint64_t m_params = param_count();
    const auto k = static_cast<std::uint64_t>(m.participants.size());
    m.bytes_down = k * m_params * kBytesPerValue + (exploring() ? k * m_params * kBytesPerValue : 0);
    m.bytes_up = updates.size() * m_params * kBytesPerValue;

    std::vector<ParamVector> payloads;
    payloads.reserve(updates.size());
    for (const auto& u : updates) payloads.push_back(u.payload);
    m.sigma2_dw = variance_across(payloads);

    server_.global_weights = apply_update(server_.aggregator, server_.global_weights, updates);
    for (const auto& u : updates) {
        auto& c = clients_[static_cast<std::size_t>(u.client_id)];
        c.weights = cfg_.aggregator == AggregatorKind::Sgd ? server_.global_weights : add(c.weights, u.payload);
    }
    evaluate(m);
    return m;
}

std::vector<RoundMetrics> run_experiment(const RoundConfig& cfg, const RunOptions& options) {
    Simulation sim(cfg);

    std::optional<MetricsWriter> writer;
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        write_manifest(*options.out_dir / "manifest.json", sim.config(), options.labels, sim.param_count());
        writer.emplace(*options.out_dir / "metrics.csv");
    }

    std::vector<RoundMetrics> history;
    auto emit = [&](RoundMetrics m) {
        if (writer) writer->write(m);
        if (options.on_round) options.on_round(m);
        history.push_back(std::move(m));
    };

    if (cfg.fedlex && cfg.guidance_override == GuidanceOverride::None) {
        emit(sim.run_exploration_round());
        if (options.out_dir) save_guidance(*options.out_dir / "guidance_global", sim.server().guidance.global());
    }

    constexpr int kPlateauWindow = 20;
    constexpr double kPlateauTolerance = 0.1;
    std::vector<double> pooled;
    for (int r = 1; r <= cfg.rounds; ++r) {
        RoundMetrics m = sim.run_round();
        pooled.push_back(m.pooled_acc);
        emit(std::move(m));
        if (cfg.early_stop && pooled.size() > kPlateauWindow) {
            const double reference = pooled[pooled.size() - 1 - kPlateauWindow];
            const double best_recent =
                *std::max_element(pooled.end() - kPlateauWindow, pooled.end());
            if (best_recent <= reference + kPlateauTolerance) break;
        }
    }
    return history;
}

}  // namespace fedlex
