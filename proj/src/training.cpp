#include "fedlex/training.hpp"

#include <cmath>
#include <numeric>

#include "fedlex/error.hpp"
#include "fedlex/random.hpp"

namespace fedlex {

TrainResult train_sgd(MlpModel& model, const Dataset& data, const SgdOptions& options, std::mt19937_64& rng,
                      const GradientHook& hook) {
    if (data.size() == 0) throw InvalidInput("train_sgd: empty training set");
    if (options.batch_size == 0) throw ConfigError("batch_size", "must be positive");

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::vector<std::size_t> batch_idx;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        shuffle_in_place(order, rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
            const auto fwd = forward_loss(model, data.batch(batch_idx));
            if (!std::isfinite(fwd.loss)) throw DivergenceError(epoch, "training loss is not finite");

            ParamVector grad = backward(model, fwd.cache);
            if (options.weight_decay != 0.0) add_scaled(grad, model.params(), options.weight_decay);
            if (hook) hook(grad, model.params());
            add_scaled(model.params(), grad, -options.learning_rate);

            loss_sum += fwd.loss;
            ++batches;
            ++result.steps;
        }
        result.epochs_run = epoch + 1;
        result.last_epoch_loss = loss_sum / static_cast<double>(batches);
    }
    return result;
}

LossResult full_batch_loss(const MlpModel& model, const Dataset& data) { return forward_loss(model, data.as_batch()); }

}  // namespace fedlex
