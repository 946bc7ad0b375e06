#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "catdp/mrp.hpp"

using namespace catdp;

namespace {

void require_row_stochastic(const Mrp& mrp) {
    for (int x = 0; x < mrp.n_states; ++x) {
        double row = 0.0;
        for (int y = 0; y < mrp.n_states; ++y) {
            REQUIRE(mrp.p(x, y) >= 0.0);
            row += mrp.p(x, y);
        }
        REQUIRE(row == Catch::Approx(1.0).margin(1e-12));
    }
}

/// One-hot transitions: state x moves deterministically to (x+1) mod n.
Mrp deterministic_cycle(int n, double gamma) {
    Mrp mrp;
    mrp.n_states = n;
    mrp.gamma = gamma;
    mrp.transition.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int x = 0; x < n; ++x)
        mrp.transition[static_cast<std::size_t>(x) * n + (x + 1) % n] = 1.0;
    for (int x = 0; x < n; ++x)
        mrp.rewards.push_back(RewardDistribution::point(static_cast<double>(x) / n));
    mrp.terminal_mask.assign(static_cast<std::size_t>(n), 0);
    mrp.validate();
    return mrp;
}

}  // namespace

TEST_CASE("chain environment layout") {
    const Mrp chain = build_chain(0.9);
    REQUIRE(chain.n_states == 11);  // 10 chain states + absorbing sink
    // Interior state 2 (index 1) moves to both neighbours with probability 0.5.
    REQUIRE(chain.p(1, 0) == 0.5);
    REQUIRE(chain.p(1, 2) == 0.5);
    // Only state 10 (index 9) is rewarding.
    REQUIRE(chain.r(9) == 1.0);
    REQUIRE(chain.r(4) == 0.0);
    // Terminal states hand over to the sink, which self-loops with reward 0.
    REQUIRE(chain.p(0, 10) == 1.0);
    REQUIRE(chain.p(9, 10) == 1.0);
    REQUIRE(chain.p(10, 10) == 1.0);
    REQUIRE(chain.r(10) == 0.0);
    REQUIRE(chain.return_range_hint.has_value());
    REQUIRE(chain.return_range() == std::pair<double, double>{0.0, 1.0});
    require_row_stochastic(chain);
}

TEST_CASE("two-state environment") {
    const Mrp ts = build_two_state(0.9);
    REQUIRE(ts.p(0, 1) == 0.4);
    REQUIRE(ts.p(0, 0) == 0.6);
    REQUIRE(ts.p(1, 0) == 0.8);
    REQUIRE(ts.r(0) == 0.0);
    REQUIRE(ts.r(1) == 1.0);
    require_row_stochastic(ts);
}

TEST_CASE("dirichlet environments") {
    const Mrp low = build_random_dirichlet(5, 0.01, 7, 0.9);
    const Mrp high = build_random_dirichlet(5, 10.0, 7, 0.9);
    require_row_stochastic(low);
    require_row_stochastic(high);
    REQUIRE(low.n_states == 5);

    // Same seed twice gives a bitwise-identical MRP.
    const Mrp again = build_random_dirichlet(5, 0.01, 7, 0.9);
    REQUIRE(low.transition == again.transition);
    for (int x = 0; x < 5; ++x) REQUIRE(low.r(x) == again.r(x));

    // Low concentration concentrates rows near vertices, high does not.
    double low_max = 0.0, high_max = 0.0;
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y) {
            low_max = std::max(low_max, low.p(x, y));
            high_max = std::max(high_max, high.p(x, y));
        }
    REQUIRE(low_max > 0.99);
    REQUIRE(high_max < 0.6);

    REQUIRE_THROWS_AS(build_random_dirichlet(5, 0.0, 7), std::invalid_argument);
    REQUIRE_THROWS_AS(build_random_dirichlet(5, -1.0, 7), std::invalid_argument);
}

TEST_CASE("with_gamma rejects bad discounts") {
    REQUIRE(build_two_state(0.9).with_gamma(0.99).gamma == 0.99);
    REQUIRE_THROWS_AS(build_two_state(0.9).with_gamma(1.0), std::invalid_argument);
}

TEST_CASE("sample_dataset on deterministic transitions") {
    const Mrp cycle = deterministic_cycle(4, 0.9);
    const auto ds = sample_dataset(cycle, 25, 99);
    for (int x = 0; x < 4; ++x)
        for (const auto y : ds.next_states[static_cast<std::size_t>(x)])
            REQUIRE(y == (x + 1) % 4);
    // And the empirical model reproduces P exactly.
    const auto em = empirical_model(ds);
    REQUIRE(em.p_hat == cycle.transition);
}

TEST_CASE("sample_dataset frequencies and determinism") {
    const Mrp ts = build_two_state(0.9);
    const std::uint64_t n = 1000000;
    const auto ds = sample_dataset(ts, n, 2024);
    std::uint64_t hits = 0;
    for (const auto y : ds.next_states[0]) hits += (y == 1);
    // 3-sigma binomial band around 0.4 is ~0.0015 at n = 1e6.
    REQUIRE(std::abs(static_cast<double>(hits) / static_cast<double>(n) - 0.4) < 0.002);

    const auto ds2 = sample_dataset(ts, n, 2024);
    REQUIRE(ds.next_states == ds2.next_states);
    const auto ds3 = sample_dataset(ts, 1, 5);
    REQUIRE(ds3.next_states[0].size() == 1);
    REQUIRE(ds3.next_states[1].size() == 1);

    // Law of large numbers: p_hat close to P entrywise.
    const auto em = empirical_model(ds);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) REQUIRE(std::abs(em.p(x, y) - ts.p(x, y)) < 0.005);
}

TEST_CASE("empirical_model counts") {
    GenerativeDataset ds;
    ds.n_states = 2;
    ds.n_per_state = 4;
    ds.next_states = {{1, 1, 0, 1}, {0, 0, 0, 0}};
    ds.det_rewards = {0.25, 0.75};
    const auto em = empirical_model(ds);
    REQUIRE(em.p(0, 1) == 0.75);
    REQUIRE(em.p(0, 0) == 0.25);
    REQUIRE(em.p(1, 0) == 1.0);  // all samples identical -> one-hot row
    REQUIRE(em.p(1, 1) == 0.0);
    REQUIRE(em.reward_dists[0].is_deterministic());
    REQUIRE(em.reward_dists[0].values[0] == 0.25);
}

TEST_CASE("stochastic rewards are sampled and merged") {
    Mrp mrp = build_two_state(0.9);
    mrp.rewards[1] = RewardDistribution{{0.0, 1.0}, {0.5, 0.5}};
    mrp.validate();
    REQUIRE(mrp.has_stochastic_rewards());
    const auto ds = sample_dataset(mrp, 10000, 31);
    REQUIRE(ds.stochastic_rewards);
    for (std::size_t i = 0; i < 100; ++i) {
        const double r = ds.reward_at(1, i);
        REQUIRE((r == 0.0 || r == 1.0));
        REQUIRE(ds.reward_at(0, i) == 0.0);
    }
    const auto em = empirical_model(ds);
    REQUIRE(em.reward_dists[1].values.size() == 2);
    REQUIRE(em.reward_dists[1].probs[0] == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("environment file round trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "catdp_env_test.json").string();
    Mrp mrp = build_chain(0.95);
    mrp.rewards[3] = RewardDistribution{{0.2, 0.8}, {0.25, 0.75}};
    mrp.validate();
    save_mrp(mrp, path);
    const Mrp loaded = load_mrp(path);
    REQUIRE(loaded.n_states == mrp.n_states);
    REQUIRE(loaded.gamma == mrp.gamma);
    REQUIRE(loaded.transition == mrp.transition);
    REQUIRE(loaded.rewards[3].values == mrp.rewards[3].values);
    REQUIRE(loaded.return_range_hint == mrp.return_range_hint);
    std::filesystem::remove(path);
}

TEST_CASE("validation rejects malformed models") {
    Mrp bad = build_two_state(0.9);
    bad.transition[0] = 0.7;  // row no longer sums to 1
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

    Mrp bad_reward = build_two_state(0.9);
    bad_reward.rewards[0] = RewardDistribution::point(1.5);
    REQUIRE_THROWS_AS(bad_reward.validate(), std::invalid_argument);
}
