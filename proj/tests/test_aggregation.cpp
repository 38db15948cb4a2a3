#include <doctest.h>

#include <cmath>
#include <random>

#include "fedlex/aggregation.hpp"
#include "fedlex/error.hpp"

using namespace fedlex;

namespace {

std::shared_ptr<const Layout> flat(std::size_t n) {
    auto lay = std::make_shared<Layout>();
    lay->append("w", {n});
    return lay;
}

std::vector<ClientUpdate> random_updates(std::mt19937_64& rng, const std::shared_ptr<const Layout>& lay,
                                         std::size_t count) {
    std::normal_distribution<double> normal;
    std::vector<ClientUpdate> out;
    for (std::size_t c = 0; c < count; ++c) {
        ClientUpdate u{static_cast<int>(c * 3 + 1), ParamVector(lay), 1 + rng() % 50};
        for (auto& x : u.payload.values()) x = normal(rng);
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace

TEST_CASE("weighted mean uses sample counts") {
    const auto lay = flat(1);
    std::vector<ClientUpdate> ups{{0, ParamVector(lay, std::vector<double>{4.0}), 3},
                                  {1, ParamVector(lay, std::vector<double>{0.0}), 1}};
    CHECK(weighted_mean(ups).raw() == std::vector<double>{3.0});
}

TEST_CASE("weighted mean does not depend on update order") {
    std::mt19937_64 rng(3);
    const auto lay = flat(9);
    auto ups = random_updates(rng, lay, 6);
    const auto forward = weighted_mean(ups);
    std::reverse(ups.begin(), ups.end());
    CHECK(weighted_mean(ups) == forward);
}

TEST_CASE("FedAvgM with zero momentum equals FedAvg bit for bit") {
    std::mt19937_64 rng(4);
    const auto lay = flat(12);
    AggregatorHyper h;
    h.beta_momentum = 0.0;
    ParamVector w_avg(lay, 0.5), w_m(lay, 0.5);
    auto avg = AggregatorState::make(AggregatorKind::Avg, h, w_avg);
    auto avgm = AggregatorState::make(AggregatorKind::AvgM, h, w_m);
    for (int r = 0; r < 5; ++r) {
        const auto ups = random_updates(rng, lay, 4);
        w_avg = apply_update(avg, w_avg, ups);
        w_m = apply_update(avgm, w_m, ups);
        CHECK(w_avg == w_m);
    }
}

TEST_CASE("FedAvgM follows the momentum recurrence") {
    const auto lay = flat(1);
    AggregatorHyper h;
    h.beta_momentum = 0.5;
    h.server_lr = 2.0;
    ParamVector w(lay, 0.0);
    auto st = AggregatorState::make(AggregatorKind::AvgM, h, w);
    const double deltas[] = {1.0, -2.0, 4.0};
    double v = 0.0, expect = 0.0;
    for (double d : deltas) {
        std::vector<ClientUpdate> ups{{0, ParamVector(lay, std::vector<double>{d}), 1}};
        w = apply_update(st, w, ups);
        v = 0.5 * v + d;
        expect += 2.0 * v;
        CHECK(w[0] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("FedSgd steps against the averaged gradient") {
    const auto lay = flat(2);
    AggregatorHyper h;
    h.server_lr = 0.1;
    auto st = AggregatorState::make(AggregatorKind::Sgd, h, ParamVector(lay));
    std::vector<ClientUpdate> ups{{0, ParamVector(lay, std::vector<double>{1.0, -2.0}), 1},
                                  {1, ParamVector(lay, std::vector<double>{3.0, 0.0}), 1}};
    const auto w = apply_update(st, ParamVector(lay, 1.0), ups);
    CHECK(w[0] == doctest::Approx(0.8));
    CHECK(w[1] == doctest::Approx(1.1));
}

TEST_CASE("FedOpt's first step moves each coordinate by server_lr along the mean delta") {
    const auto lay = flat(3);
    AggregatorHyper h;
    h.server_lr = 0.01;
    auto st = AggregatorState::make(AggregatorKind::Opt, h, ParamVector(lay));
    std::vector<ClientUpdate> ups{{0, ParamVector(lay, std::vector<double>{0.3, -5.0, 0.0}), 1}};
    const auto w = apply_update(st, ParamVector(lay, 0.0), ups);
    CHECK(w[0] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(w[2] == 0.0);
    CHECK(st.adam_t == 1);
}

TEST_CASE("FedProx aggregates like FedAvg and adds the proximal pull on clients") {
    std::mt19937_64 rng(8);
    const auto lay = flat(5);
    const auto ups = random_updates(rng, lay, 3);
    auto a = AggregatorState::make(AggregatorKind::Avg, {}, ParamVector(lay));
    auto p = AggregatorState::make(AggregatorKind::Prox, {}, ParamVector(lay));
    CHECK(apply_update(a, ParamVector(lay, 1.0), ups) == apply_update(p, ParamVector(lay, 1.0), ups));

    const ParamVector g(lay, 1.0), local(lay, 3.0), global(lay, 2.0);
    CHECK(prox_gradient(g, local, global, 0.5).raw() == std::vector<double>(5, 1.5));
    CHECK(prox_gradient(g, local, global, 0.0) == g);
    CHECK_THROWS_AS(prox_gradient(g, local, global, -1.0), ContractViolation);
}

TEST_CASE("aggregator kinds round-trip through their names") {
    for (auto k : {AggregatorKind::Avg, AggregatorKind::AvgM, AggregatorKind::Sgd, AggregatorKind::Opt,
                   AggregatorKind::Prox})
        CHECK(parse_aggregator(to_string(k)) == k);
    CHECK_THROWS_AS(parse_aggregator("median"), ConfigError);
    CHECK(default_server_lr(AggregatorKind::Sgd, 0.05) == 0.05);
    CHECK(default_server_lr(AggregatorKind::AvgM, 0.05) == 1.0);
}
