#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "catdp/quantile.hpp"
#include "catdp/rng.hpp"

using namespace catdp;

namespace {

Mrp one_state_loop(double reward, double gamma) {
    Mrp mrp;
    mrp.n_states = 1;
    mrp.transition = {1.0};
    mrp.rewards = {RewardDistribution::point(reward)};
    mrp.gamma = gamma;
    mrp.terminal_mask = {0};
    mrp.validate();
    return mrp;
}

double sup_w_inf(const QuantileTable& a, const QuantileTable& b) {
    double worst = 0.0;
    for (int x = 0; x < a.n_states; ++x)
        for (int i = 0; i < a.m; ++i) worst = std::max(worst, std::abs(a.at(x, i) - b.at(x, i)));
    return worst;
}

}  // namespace

TEST_CASE("tau levels are midpoints") {
    const auto taus = QuantileTable::taus(4);
    REQUIRE(taus == std::vector<double>{0.125, 0.375, 0.625, 0.875});
}

TEST_CASE("qdp fixed points on one-state loops") {
    const double gamma = 0.9;
    // r = 0: theta == 0 is a fixed point.
    QuantileTable zero(1, 8, 0.0);
    const auto stepped = qdp_step(make_model(one_state_loop(0.0, gamma)), zero);
    for (int i = 0; i < 8; ++i) REQUIRE(stepped.at(0, i) == 0.0);

    // r = 1: the deterministic return (1-gamma)^{-1} at every quantile.
    const auto res = qdp_solve(make_model(one_state_loop(1.0, gamma)), 8,
                               qdp_iteration_count(gamma), 0.0, 10.0);
    for (int i = 0; i < 8; ++i) REQUIRE(res.table.at(0, i) == Catch::Approx(10.0).margin(1e-6));
    REQUIRE(res.final_step_w1 < 1e-7);
}

TEST_CASE("qdp step from zero tables returns the immediate rewards") {
    const auto model = make_model(build_two_state(0.9));
    QuantileTable zero(2, 5, 0.0);
    const auto next = qdp_step(model, zero);
    for (int i = 0; i < 5; ++i) {
        REQUIRE(next.at(0, i) == 0.0);  // r(state 0) = 0
        REQUIRE(next.at(1, i) == 1.0);  // r(state 1) = 1
    }
}

TEST_CASE("qdp with zero iterations returns the midpoint initialization") {
    const auto res = qdp_solve(make_model(build_two_state(0.9)), 4, 0, 0.0, 10.0);
    for (int x = 0; x < 2; ++x)
        for (int i = 0; i < 4; ++i) REQUIRE(res.table.at(x, i) == 5.0);
}

TEST_CASE("qdp recovers deterministic returns exactly") {
    // x0 -> x1 -> x1 (absorbing), rewards 0.5 and 0.25.
    const double gamma = 0.8;
    Mrp mrp;
    mrp.n_states = 2;
    mrp.transition = {0.0, 1.0, 0.0, 1.0};
    mrp.rewards = {RewardDistribution::point(0.5), RewardDistribution::point(0.25)};
    mrp.gamma = gamma;
    mrp.terminal_mask = {0, 0};
    mrp.validate();
    const double g1 = 0.25 / (1.0 - gamma);
    const double g0 = 0.5 + gamma * g1;
    const auto res = qdp_solve(make_model(mrp), 6, qdp_iteration_count(gamma), 0.0,
                               1.0 / (1.0 - gamma));
    for (int i = 0; i < 6; ++i) {
        REQUIRE(res.table.at(0, i) == Catch::Approx(g0).margin(1e-6));
        REQUIRE(res.table.at(1, i) == Catch::Approx(g1).margin(1e-6));
    }
}

TEST_CASE("qdp tables stay monotone and inside the return range") {
    SplitMix64 rng(21);
    const auto model = make_model(build_two_state(0.95));
    QuantileTable t(2, 16, 0.0);
    for (int x = 0; x < 2; ++x) {
        std::vector<double> row(16);
        for (auto& v : row) v = 20.0 * rng.next_double();
        std::sort(row.begin(), row.end());
        for (int i = 0; i < 16; ++i) t.at(x, i) = row[static_cast<std::size_t>(i)];
    }
    for (int step = 0; step < 50; ++step) {
        t = qdp_step(model, t);
        for (int x = 0; x < 2; ++x) {
            for (int i = 1; i < 16; ++i) REQUIRE(t.at(x, i) >= t.at(x, i - 1));
            const double mean = t.distribution(x).mean();
            REQUIRE(mean >= 0.0);
            REQUIRE(mean <= 20.0 + 1e-9);
        }
    }
}

TEST_CASE("qdp step is non-expansive in sup-w_inf on deterministic transitions") {
    SplitMix64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3;
        Mrp mrp;
        mrp.n_states = n;
        mrp.gamma = 0.9;
        mrp.transition.assign(9, 0.0);
        for (int x = 0; x < n; ++x)
            mrp.transition[static_cast<std::size_t>(x) * n +
                           static_cast<int>(rng.next() % n)] = 1.0;
        for (int x = 0; x < n; ++x)
            mrp.rewards.push_back(RewardDistribution::point(rng.next_double()));
        mrp.terminal_mask.assign(3, 0);
        mrp.validate();
        const auto model = make_model(mrp);

        QuantileTable a(n, 7, 0.0), b(n, 7, 0.0);
        for (int x = 0; x < n; ++x) {
            std::vector<double> ra(7), rb(7);
            for (auto& v : ra) v = 10.0 * rng.next_double();
            for (auto& v : rb) v = 10.0 * rng.next_double();
            std::sort(ra.begin(), ra.end());
            std::sort(rb.begin(), rb.end());
            for (int i = 0; i < 7; ++i) {
                a.at(x, i) = ra[static_cast<std::size_t>(i)];
                b.at(x, i) = rb[static_cast<std::size_t>(i)];
            }
        }
        REQUIRE(sup_w_inf(qdp_step(model, a), qdp_step(model, b)) <= sup_w_inf(a, b) + 1e-12);
    }
}

TEST_CASE("quantile csv schema") {
    QuantileTable t(1, 2, 0.0);
    t.at(0, 0) = 1.5;
    t.at(0, 1) = 2.5;
    std::ostringstream out;
    write_csv(t, out);
    REQUIRE(out.str() == "state,tau,theta\n0,0.25,1.5\n0,0.75,2.5\n");
}
