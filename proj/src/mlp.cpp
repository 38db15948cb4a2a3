#include "fedlex/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "fedlex/error.hpp"
#include "fedlex/random.hpp"

namespace fedlex {

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("activation", "expected relu or tanh, got '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

namespace {

void validate_sizes(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw ConfigError("layer_sizes", "invalid architecture: need at least input and output");
    for (auto s : sizes)
        if (s == 0) throw ConfigError("layer_sizes", "invalid architecture: layer sizes must be positive");
}

std::size_t weight_slot(std::size_t layer) { return 2 * layer; }
std::size_t bias_slot(std::size_t layer) { return 2 * layer + 1; }

// out = in * W^T + b
Matrix dense(const Matrix& in, std::span<const double> w, std::span<const double> b, std::size_t out_dim) {
    Matrix out(in.rows, out_dim);
    const std::size_t in_dim = in.cols;
    for (std::size_t r = 0; r < in.rows; ++r) {
        const double* x = in.data.data() + r * in_dim;
        double* y = out.data.data() + r * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) {
            const double* wj = w.data() + j * in_dim;
            double acc = b[j];
            for (std::size_t k = 0; k < in_dim; ++k) acc += x[k] * wj[k];
            y[j] = acc;
        }
    }
    return out;
}

void activate(Matrix& m, Activation a) {
    if (a == Activation::Relu) {
        for (double& v : m.data) v = v > 0.0 ? v : 0.0;
    } else {
        for (double& v : m.data) v = std::tanh(v);
    }
}

struct Pass {
    std::vector<Matrix> activations;
    Matrix scores;
};

Pass run_forward(const MlpModel& model, const Matrix& inputs) {
    if (inputs.cols != model.input_size())
        throw ShapeError("input width " + std::to_string(inputs.cols) + " does not match model input size " +
                         std::to_string(model.input_size()));
    const auto& sizes = model.layer_sizes();
    const auto& p = model.params();
    Pass pass;
    pass.activations.push_back(inputs);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Matrix z = dense(pass.activations.back(), p.slot(weight_slot(l)), p.slot(bias_slot(l)), sizes[l + 1]);
        if (l + 1 == model.num_layers()) {
            pass.scores = std::move(z);
        } else {
            activate(z, model.activation());
            pass.activations.push_back(std::move(z));
        }
    }
    return pass;
}

void validate_batch(const MlpModel& model, const Batch& batch) {
    if (batch.inputs.rows == 0) throw InvalidInput("batch must contain at least one sample");
    if (batch.labels.size() != batch.inputs.rows) throw ShapeError("batch label count does not match input rows");
    for (int y : batch.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= model.classes())
            throw InvalidInput("label " + std::to_string(y) + " outside [0, classes)");
}

}  // namespace

std::shared_ptr<const Layout> mlp_layout(const std::vector<std::size_t>& layer_sizes) {
    validate_sizes(layer_sizes);
    auto layout = std::make_shared<Layout>();
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        layout->append("dense" + std::to_string(l) + ".weight", {layer_sizes[l + 1], layer_sizes[l]});
        layout->append("dense" + std::to_string(l) + ".bias", {layer_sizes[l + 1]});
    }
    return layout;
}

ParamVector init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    ParamVector params(mlp_layout(layer_sizes));
    auto rng = make_rng(seed, Stream::Model);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : params.slot(weight_slot(l))) w = dist(rng);
    }
    return params;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, Activation activation, ParamVector params)
    : layer_sizes_(std::move(layer_sizes)), activation_(activation), params_(std::move(params)) {
    validate_sizes(layer_sizes_);
    if (!(params_.layout() == *mlp_layout(layer_sizes_))) throw ShapeError("params do not match the architecture");
}

MlpModel MlpModel::create(std::vector<std::size_t> layer_sizes, Activation activation, std::uint64_t seed) {
    auto params = init_params(layer_sizes, seed);
    return MlpModel(std::move(layer_sizes), activation, std::move(params));
}

void MlpModel::set_params(ParamVector params) {
    require_same_layout(params_, params, "set_params");
    params_ = std::move(params);
}

std::uint64_t fingerprint(const ParamVector& params) {
    // FNV-1a over the raw bytes.
    std::uint64_t h = 1469598103934665603ull;
    for (double v : params.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

LossResult forward_loss(const MlpModel& model, const Batch& batch) {
    validate_batch(model, batch);
    Pass pass = run_forward(model, batch.inputs);

    const std::size_t n = batch.inputs.rows;
    const std::size_t k = model.classes();
    Matrix probs(n, k);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto z = pass.scores.row(r);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(z[j] - zmax);
            probs(r, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < k; ++j) probs(r, j) /= sum;
        total += -(z[static_cast<std::size_t>(batch.labels[r])] - zmax - std::log(sum));
    }

    LossResult result;
    result.loss = total / static_cast<double>(n);
    result.cache.param_fingerprint = fingerprint(model.params());
    result.cache.activations = std::move(pass.activations);
    result.cache.probabilities = std::move(probs);
    result.cache.labels = batch.labels;
    return result;
}

ParamVector backward(const MlpModel& model, const ForwardCache& cache) {
    if (cache.param_fingerprint != fingerprint(model.params()))
        throw ContractViolation("backward: stale forward cache (parameters changed since forward_loss)");
    if (cache.activations.size() != model.num_layers())
        throw ContractViolation("backward: cache does not belong to this architecture");

    const auto& sizes = model.layer_sizes();
    const std::size_t n = cache.probabilities.rows;
    ParamVector grad = ParamVector::zeros_like(model.params());

    // dL/dz for the output layer of the mean cross-entropy.
    Matrix dz = cache.probabilities;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        dz(r, static_cast<std::size_t>(cache.labels[r])) -= 1.0;
        for (double& v : dz.row(r)) v *= inv_n;
    }

    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const Matrix& a = cache.activations[l];
        const std::size_t in_dim = sizes[l];
        const std::size_t out_dim = sizes[l + 1];
        auto gw = grad.slot(weight_slot(l));
        auto gb = grad.slot(bias_slot(l));
        for (std::size_t r = 0; r < n; ++r) {
            const double* ar = a.data.data() + r * in_dim;
            for (std::size_t j = 0; j < out_dim; ++j) {
                const double d = dz(r, j);
                gb[j] += d;
                double* gwj = gw.data() + j * in_dim;
                for (std::size_t k = 0; k < in_dim; ++k) gwj[k] += d * ar[k];
            }
        }
        if (l == 0) break;

        auto w = model.params().slot(weight_slot(l));
        Matrix da(n, in_dim);
        for (std::size_t r = 0; r < n; ++r) {
            double* dar = da.data.data() + r * in_dim;
            for (std::size_t j = 0; j < out_dim; ++j) {
                const double d = dz(r, j);
                const double* wj = w.data() + j * in_dim;
                for (std::size_t k = 0; k < in_dim; ++k) dar[k] += d * wj[k];
            }
        }
        // a holds post-activation values of layer l-1's output.
        for (std::size_t i = 0; i < da.data.size(); ++i) {
            const double act = a.data[i];
            if (model.activation() == Activation::Relu)
                da.data[i] = act > 0.0 ? da.data[i] : 0.0;
            else
                da.data[i] *= 1.0 - act * act;
        }
        dz = std::move(da);
    }
    return grad;
}

ParamVector finite_diff_grad(const MlpModel& model, const Batch& batch, double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidInput("finite_diff_grad: epsilon must be positive");
    MlpModel probe = model;
    ParamVector grad = ParamVector::zeros_like(model.params());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double original = model.params()[i];
        probe.params()[i] = original + epsilon;
        const double up = forward_loss(probe, batch).loss;
        probe.params()[i] = original - epsilon;
        const double down = forward_loss(probe, batch).loss;
        probe.params()[i] = original;
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

Matrix logits(const MlpModel& model, const Matrix& inputs) { return run_forward(model, inputs).scores; }

double accuracy(const MlpModel& model, const Matrix& inputs, const std::vector<int>& labels) {
    if (inputs.rows == 0) return 0.0;
    if (labels.size() != inputs.rows) throw ShapeError("accuracy: label count does not match input rows");
    const Matrix scores = logits(model, inputs);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < scores.rows; ++r) {
        auto z = scores.row(r);
        const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        if (best == labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.rows);
}

}  // namespace fedlex
