#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "fedlex/dataset.hpp"
#include "fedlex/error.hpp"
#include "fedlex/guidance.hpp"
#include "fedlex/random.hpp"

using namespace fedlex;

namespace {

std::shared_ptr<const Layout> two_slot_layout(std::size_t a, std::size_t b) {
    auto lay = std::make_shared<Layout>();
    lay->append("first", {a});
    lay->append("second", {b});
    return lay;
}

GuidanceMatrix random_raw(std::mt19937_64& rng, const std::shared_ptr<const Layout>& lay) {
    std::exponential_distribution<double> expo(3.0);
    GuidanceMatrix g{ParamVector(lay), false};
    for (auto& v : g.values.values()) v = expo(rng) * expo(rng);
    return g;
}

// Brute-force min-max over an index range.
std::vector<double> oracle_minmax(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double lo = v[begin], hi = v[begin];
    for (std::size_t i = begin; i < end; ++i) lo = std::min(lo, v[i]), hi = std::max(hi, v[i]);
    std::vector<double> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(hi == lo ? 1.0 : (v[i] - lo) / (hi - lo));
    return out;
}

}  // namespace

TEST_CASE("deviation is the squared displacement") {
    const auto lay = two_slot_layout(2, 1);
    const ParamVector a(lay, std::vector<double>{1.0, -2.0, 0.5});
    const ParamVector b(lay, std::vector<double>{0.0, 1.0, 0.5});
    const auto d = deviation(a, b);
    CHECK(d.values.raw() == std::vector<double>{1.0, 9.0, 0.0});
    CHECK_FALSE(d.normalized);
}

TEST_CASE("normalize_local matches a brute-force min-max") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto lay = two_slot_layout(1 + rng() % 9, 1 + rng() % 9);
        const auto raw = random_raw(rng, lay);
        const auto& v = raw.values.raw();

        const auto whole = normalize_local(raw, false);
        const auto expect_whole = oracle_minmax(v, 0, v.size());
        auto per_layer = oracle_minmax(v, 0, lay->slots()[0].size());
        const auto second = oracle_minmax(v, lay->slots()[1].offset, v.size());
        per_layer.insert(per_layer.end(), second.begin(), second.end());
        const auto layered = normalize_local(raw, true);
        CHECK(whole.normalized);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(std::abs(whole.values[i] - expect_whole[i]) <= 1e-12);
            CHECK(std::abs(layered.values[i] - per_layer[i]) <= 1e-12);
        }
        CHECK(*std::min_element(whole.values.raw().begin(), whole.values.raw().end()) == 0.0);
        CHECK(*std::max_element(whole.values.raw().begin(), whole.values.raw().end()) == 1.0);
    }
}

TEST_CASE("normalize_local edge cases") {
    const auto lay = two_slot_layout(2, 2);
    CHECK(normalize_local(GuidanceMatrix{ParamVector(lay, 0.0), false}).values.raw() ==
          std::vector<double>(4, 1.0));
    CHECK(normalize_local(GuidanceMatrix{ParamVector(lay, 0.3), false}).values.raw() ==
          std::vector<double>(4, 1.0));
    CHECK_THROWS_AS(normalize_local(GuidanceMatrix{ParamVector(lay, -1.0), false}), ContractViolation);
    CHECK_THROWS_AS(normalize_local(GuidanceMatrix::ones_like(ParamVector(lay))), ContractViolation);
}

TEST_CASE("normalize_local is invariant to positive scaling") {
    std::mt19937_64 rng(5);
    const auto lay = two_slot_layout(6, 4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto raw = random_raw(rng, lay);
        const double k = std::exp(std::uniform_real_distribution<double>(-5.0, 5.0)(rng));
        const GuidanceMatrix scaled{scale(raw.values, k), false};
        const auto a = normalize_local(raw);
        const auto b = normalize_local(scaled);
        for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);
    }
}

TEST_CASE("aggregate_global and modulate match brute-force oracles") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto lay = two_slot_layout(1 + rng() % 7, 1 + rng() % 7);
        const std::size_t n = 1 + rng() % 6;
        std::vector<GuidanceMatrix> locals;
        for (std::size_t c = 0; c < n; ++c) locals.push_back(normalize_local(random_raw(rng, lay)));
        const auto g = aggregate_global(locals);
        CHECK(g.normalized);
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            double sum = 0.0;
            for (const auto& l : locals) sum += l.values[i];
            CHECK(std::abs(g.values[i] - sum / static_cast<double>(n)) <= 1e-12);
            CHECK(g.values[i] >= 0.0);
            CHECK(g.values[i] <= 1.0);
        }

        ParamVector grad(lay);
        for (auto& x : grad.values()) x = unit(rng) * 4.0 - 2.0;
        const double floor = trial % 2 ? unit(rng) * 0.9 : 0.0;
        const auto out = modulate(grad, g, floor);
        for (std::size_t i = 0; i < grad.size(); ++i)
            CHECK(std::abs(out[i] - grad[i] * std::max(g.values[i], floor)) <= 1e-12);
        ParamVector in_place = grad;
        modulate_in_place(in_place, g, floor);
        CHECK(in_place == out);
    }
}

TEST_CASE("modulate preconditions and identity") {
    const auto lay = two_slot_layout(2, 1);
    const ParamVector grad(lay, std::vector<double>{0.25, -3.0, 7.5});
    const auto ones = GuidanceMatrix::ones_like(grad);
    CHECK(modulate(grad, ones) == grad);
    CHECK_THROWS_AS(modulate(grad, GuidanceMatrix{ParamVector(lay, 0.5), false}), ContractViolation);
    CHECK_THROWS_AS(modulate(grad, ones, 1.0), ContractViolation);
    CHECK_THROWS_AS(modulate(grad, ones, -0.1), ContractViolation);
}

TEST_CASE("exploration with zero learning rate has zero deviation") {
    const auto ds = gen_synthetic(3, 4, 20, 2.0, 0);
    const auto model = MlpModel::create({4, 5, 3}, Activation::Relu, 1);
    SgdOptions opts;
    opts.epochs = 3;
    opts.batch_size = 7;
    opts.learning_rate = 0.0;
    const auto report = explore(model, ds, opts, 9, 2);
    CHECK(max_abs(report.g_local.values) == 0.0);
    CHECK(report.epochs_run == 3);
}

TEST_CASE("exploration matches a hand-written SGD loop") {
    const auto ds = gen_synthetic(3, 4, 20, 2.0, 0);
    const auto model = MlpModel::create({4, 6, 3}, Activation::Tanh, 3);
    SgdOptions opts;
    opts.epochs = 4;
    opts.batch_size = 16;
    opts.learning_rate = 0.05;
    opts.weight_decay = 1e-3;
    const std::uint64_t seed = 21;
    const int client = 4;

    MlpModel probe = model;
    auto rng = make_rng(seed, Stream::Exploration, {static_cast<std::uint64_t>(client)});
    for (int e = 0; e < opts.epochs; ++e) {
        std::vector<std::size_t> order(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t s = 0; s < order.size(); s += opts.batch_size) {
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + opts.batch_size)));
            const auto grad = backward(probe, forward_loss(probe, ds.batch(idx)).cache);
            auto& w = probe.params();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opts.learning_rate * (grad[i] + opts.weight_decay * w[i]);
        }
    }
    const auto report = explore(model, ds, opts, seed, client);
    for (std::size_t i = 0; i < report.g_local.values.size(); ++i) {
        const double d = model.params()[i] - probe.params()[i];
        CHECK(std::abs(report.g_local.values[i] - d * d) <= 1e-12);
    }
}

TEST_CASE("registry refresh uses participating explorers and falls back otherwise") {
    const auto lay = two_slot_layout(1, 1);
    GuidanceRegistry reg;
    reg.store(1, GuidanceMatrix{ParamVector(lay, std::vector<double>{0.0, 1.0}), true});
    reg.store(3, GuidanceMatrix{ParamVector(lay, std::vector<double>{1.0, 1.0}), true});
    reg.set_global(GuidanceMatrix{ParamVector(lay, std::vector<double>{0.5, 1.0}), true});

    const std::vector<int> only_one{0, 1, 2};
    CHECK(reg.refresh_global(only_one).values.raw() == std::vector<double>{0.0, 1.0});
    const std::vector<int> none{0, 2, 4};
    CHECK(reg.refresh_global(none).values.raw() == std::vector<double>{0.0, 1.0});
    const std::vector<int> both{1, 3};
    CHECK(reg.refresh_global(both).values.raw() == std::vector<double>{0.5, 1.0});
    CHECK(reg.is_explorer(3));
    CHECK_FALSE(reg.is_explorer(0));
    CHECK_THROWS_AS(reg.store(5, GuidanceMatrix{ParamVector(lay), false}), ContractViolation);
}

TEST_CASE("guidance files round-trip") {
    const auto stem = std::filesystem::temp_directory_path() / "fedlex_guidance_rt";
    const auto lay = two_slot_layout(3, 2);
    GuidanceMatrix g{ParamVector(lay, std::vector<double>{0.0, 0.1, 1.0 / 3.0, 0.75, 1.0}), true};
    save_guidance(stem, g);
    const auto back = load_guidance(stem);
    CHECK(back.values == g.values);
    CHECK(back.normalized);
}
