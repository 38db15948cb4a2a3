#include "fedlex/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedlex/error.hpp"

namespace fedlex {

AggregatorKind parse_aggregator(std::string_view name) {
    if (name == "avg") return AggregatorKind::Avg;
    if (name == "avgm") return AggregatorKind::AvgM;
    if (name == "sgd") return AggregatorKind::Sgd;
    if (name == "opt") return AggregatorKind::Opt;
    if (name == "prox") return AggregatorKind::Prox;
    throw ConfigError("aggregator", "expected one of avg, avgm, sgd, opt, prox; got '" + std::string(name) + "'");
}

std::string_view to_string(AggregatorKind k) {
    switch (k) {
        case AggregatorKind::Avg: return "avg";
        case AggregatorKind::AvgM: return "avgm";
        case AggregatorKind::Sgd: return "sgd";
        case AggregatorKind::Opt: return "opt";
        case AggregatorKind::Prox: return "prox";
    }
    return "?";
}

double default_server_lr(AggregatorKind kind, double client_learning_rate) {
    switch (kind) {
        case AggregatorKind::Opt: return 1e-2;
        case AggregatorKind::Sgd: return client_learning_rate;
        default: return 1.0;
    }
}

AggregatorState AggregatorState::make(AggregatorKind kind, AggregatorHyper hyper, const ParamVector& like) {
    AggregatorState s;
    s.kind = kind;
    s.hyper = hyper;
    if (kind == AggregatorKind::AvgM) s.momentum = ParamVector::zeros_like(like);
    if (kind == AggregatorKind::Opt) {
        s.adam_m = ParamVector::zeros_like(like);
        s.adam_v = ParamVector::zeros_like(like);
    }
    return s;
}

ParamVector weighted_mean(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw InvalidInput("weighted_mean: no client updates");
    std::vector<const ClientUpdate*> ordered;
    double total = 0.0;
    for (const auto& u : updates) {
        if (u.num_samples < 1) throw InvalidInput("weighted_mean: num_samples must be >= 1");
        require_same_layout(updates.front().payload, u.payload, "weighted_mean");
        ordered.push_back(&u);
        total += static_cast<double>(u.num_samples);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

    ParamVector mean = ParamVector::zeros_like(updates.front().payload);
    for (const auto* u : ordered) add_scaled(mean, u->payload, static_cast<double>(u->num_samples) / total);
    return mean;
}

namespace {

void require_kind(const AggregatorState& state, std::initializer_list<AggregatorKind> allowed, const char* op) {
    if (std::find(allowed.begin(), allowed.end(), state.kind) == allowed.end())
        throw ContractViolation(std::string(op) + ": aggregator kind is " + std::string(to_string(state.kind)));
}

}  // namespace

ParamVector apply_avg(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates) {
    require_kind(state, {AggregatorKind::Avg, AggregatorKind::Prox}, "apply_avg");
    return add(global, weighted_mean(updates));
}

ParamVector apply_avgm(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates) {
    require_kind(state, {AggregatorKind::AvgM}, "apply_avgm");
    if (!state.momentum) state.momentum = ParamVector::zeros_like(global);
    const ParamVector delta = weighted_mean(updates);
    ParamVector& v = *state.momentum;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = state.hyper.beta_momentum * v[i] + delta[i];
    ParamVector out = global;
    add_scaled(out, v, state.hyper.server_lr);
    return out;
}

ParamVector apply_sgd(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates) {
    require_kind(state, {AggregatorKind::Sgd}, "apply_sgd");
    ParamVector out = global;
    add_scaled(out, weighted_mean(updates), -state.hyper.server_lr);
    return out;
}

ParamVector apply_opt(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates) {
    require_kind(state, {AggregatorKind::Opt}, "apply_opt");
    if (!state.adam_m) state.adam_m = ParamVector::zeros_like(global);
    if (!state.adam_v) state.adam_v = ParamVector::zeros_like(global);
    const auto& h = state.hyper;

    // The mean delta points downhill, so it enters Adam as the negative
    // gradient.
    const ParamVector delta = weighted_mean(updates);
    ++state.adam_t;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.adam_t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.adam_t));
    ParamVector& m = *state.adam_m;
    ParamVector& v = *state.adam_v;
    ParamVector out = global;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double g = -delta[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        out[i] -= h.server_lr * m_hat / (std::sqrt(v_hat) + h.adam_eps);
    }
    return out;
}

ParamVector apply_update(AggregatorState& state, const ParamVector& global, std::span<const ClientUpdate> updates) {
    switch (state.kind) {
        case AggregatorKind::Avg:
        case AggregatorKind::Prox: return apply_avg(state, global, updates);
        case AggregatorKind::AvgM: return apply_avgm(state, global, updates);
        case AggregatorKind::Sgd: return apply_sgd(state, global, updates);
        case AggregatorKind::Opt: return apply_opt(state, global, updates);
    }
    throw ContractViolation("apply_update: unknown aggregator kind");
}

void add_prox_term(ParamVector& local_grad, const ParamVector& w_local, const ParamVector& w_global, double mu) {
    if (mu < 0.0) throw ContractViolation("prox_gradient: mu must be >= 0");
    require_same_layout(local_grad, w_local, "prox_gradient");
    require_same_layout(local_grad, w_global, "prox_gradient");
    if (mu == 0.0) return;
    for (std::size_t i = 0; i < local_grad.size(); ++i) local_grad[i] += mu * (w_local[i] - w_global[i]);
}

ParamVector prox_gradient(const ParamVector& local_grad, const ParamVector& w_local, const ParamVector& w_global,
                          double mu) {
    ParamVector out = local_grad;
    add_prox_term(out, w_local, w_global, mu);
    return out;
}

}  // namespace fedlex
