#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "fedlex/dataset.hpp"
#include "fedlex/mlp.hpp"

namespace fedlex {

struct SgdOptions {
    int epochs = 1;
    std::size_t batch_size = 50;
    double learning_rate = 3e-4;
    double weight_decay = 0.0;
};

// Called once per step after weight decay has been folded into the gradient
// and before the weights move. May rewrite the gradient in place.
using GradientHook = std::function<void(ParamVector& gradient, const ParamVector& weights)>;

struct TrainResult {
    int epochs_run = 0;
    std::size_t steps = 0;
    double last_epoch_loss = 0.0;  // mean batch loss of the final epoch
};

// Mini-batch SGD: each epoch draws a fresh permutation from `rng` and walks
// it in batches of batch_size (the last batch may be short). Throws
// DivergenceError if a batch loss is not finite.
TrainResult train_sgd(MlpModel& model, const Dataset& data, const SgdOptions& options, std::mt19937_64& rng,
                      const GradientHook& hook = {});

// Mean loss and gradient over the whole dataset in one batch.
LossResult full_batch_loss(const MlpModel& model, const Dataset& data);

}  // namespace fedlex
