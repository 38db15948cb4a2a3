#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedlex/param_vector.hpp"

namespace fedlex {

enum class AggregatorKind { Avg, AvgM, Sgd, Opt, Prox };

AggregatorKind parse_aggregator(std::string_view name);
std::string_view to_string(AggregatorKind k);

struct AggregatorHyper {
    double server_lr = 1.0;
    double beta_momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double prox_mu = 0.01;
};

// Server learning rate used when the config leaves it unset. FedSgd takes
// one step of the client learning rate on the averaged gradient.
double default_server_lr(AggregatorKind kind, double client_learning_rate);

struct AggregatorState {
    AggregatorKind kind = AggregatorKind::Avg;
    AggregatorHyper hyper;
    std::optional<ParamVector> momentum;  // avgm
    std::optional<ParamVector> adam_m;    // opt
    std::optional<ParamVector> adam_v;    // opt
    long adam_t = 0;

    static AggregatorState make(AggregatorKind kind, AggregatorHyper hyper, const ParamVector& like);
};

// Weight delta (w_local - w_global) for every kind except Sgd, which sends
// the raw gradient.
struct ClientUpdate {
    int client_id = 0;
    ParamVector payload;
    std::size_t num_samples = 1;
};

// sum_i (n_i / sum n) * payload_i, accumulated in client-id order.
ParamVector weighted_mean(std::span<const ClientUpdate> updates);

ParamVector apply_avg(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates);
ParamVector apply_avgm(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates);
ParamVector apply_sgd(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates);
ParamVector apply_opt(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates);

// Dispatches on state.kind. FedProx aggregates like FedAvg; its difference
// lives on the client (prox_gradient).
ParamVector apply_update(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates);

// local_grad + mu * (w_local - w_global)
ParamVector prox_gradient(const ParamVector& local_grad, const ParamVector& w_local, const ParamVector& w_global,
                          double mu);
void add_prox_term(ParamVector& local_grad, const ParamVector& w_local, const ParamVector& w_global, double mu);

}  // namespace fedlex
