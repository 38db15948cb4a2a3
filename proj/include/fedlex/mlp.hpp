#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "fedlex/matrix.hpp"
#include "fedlex/param_vector.hpp"

namespace fedlex {

enum class Activation { Relu, Tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// n samples of d features with class labels in [0, classes).
struct Batch {
    Matrix inputs;
    std::vector<int> labels;
};

// Layout of a fully connected network: per layer a weight slot of shape
// {out, in} (row-major) followed by a bias slot of shape {out}.
std::shared_ptr<const Layout> mlp_layout(const std::vector<std::size_t>& layer_sizes);

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Pure in
// (layer_sizes, seed).
ParamVector init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed);

// Feed-forward classifier: hidden layers use `activation`, the output layer
// is a softmax over layer_sizes.back() classes.
class MlpModel {
public:
    MlpModel(std::vector<std::size_t> layer_sizes, Activation activation, ParamVector params);

    static MlpModel create(std::vector<std::size_t> layer_sizes, Activation activation, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
    std::size_t input_size() const { return layer_sizes_.front(); }
    std::size_t classes() const { return layer_sizes_.back(); }
    std::size_t num_layers() const { return layer_sizes_.size() - 1; }
    Activation activation() const noexcept { return activation_; }

    const ParamVector& params() const noexcept { return params_; }
    ParamVector& params() noexcept { return params_; }
    void set_params(ParamVector params);

private:
    std::vector<std::size_t> layer_sizes_;
    Activation activation_;
    ParamVector params_;
};

// Everything backward() needs from a forward pass. The fingerprint ties the
// cache to the exact parameter values it was computed with.
struct ForwardCache {
    std::uint64_t param_fingerprint = 0;
    std::vector<Matrix> activations;  // activations[0] is the input batch
    Matrix probabilities;
    std::vector<int> labels;
};

struct LossResult {
    double loss = 0.0;
    ForwardCache cache;
};

// Mean softmax cross-entropy of the batch.
LossResult forward_loss(const MlpModel& model, const Batch& batch);

// Gradient of the batch-mean loss w.r.t. model.params(). Throws
// ContractViolation if the params changed since the forward pass.
ParamVector backward(const MlpModel& model, const ForwardCache& cache);

// Central differences, one parameter at a time.
ParamVector finite_diff_grad(const MlpModel& model, const Batch& batch, double epsilon);

// Raw output scores (pre-softmax), one row per input.
Matrix logits(const MlpModel& model, const Matrix& inputs);

// Fraction of rows whose arg-max score equals the label, in [0, 1].
double accuracy(const MlpModel& model, const Matrix& inputs, const std::vector<int>& labels);

std::uint64_t fingerprint(const ParamVector& params);

}  // namespace fedlex
