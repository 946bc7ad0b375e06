#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "catdp/metrics.hpp"
#include "catdp/rng.hpp"

namespace catdp {

/// Per-state reward specification: a point mass for deterministic rewards or
/// a finite discrete distribution on [0,1].
struct RewardDistribution {
    std::vector<double> values;
    std::vector<double> probs;

    static RewardDistribution point(double r) { return {{r}, {1.0}}; }

    bool is_deterministic() const { return values.size() == 1; }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
        return m;
    }
    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }

    void validate() const {
        if (values.empty() || values.size() != probs.size())
            throw std::invalid_argument("RewardDistribution: malformed support");
        double total = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] < -1e-12 || values[i] > 1.0 + 1e-12)
                throw std::invalid_argument("RewardDistribution: reward outside [0,1]");
            if (probs[i] < 0.0) throw std::invalid_argument("RewardDistribution: negative mass");
            total += probs[i];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("RewardDistribution: masses do not sum to 1");
    }
};

/// Finite-state Markov reward process: row-stochastic transition matrix,
/// per-state reward spec, discount gamma in [0,1). Terminal states are
/// encoded as a one-step move into a dedicated zero-reward absorbing sink, so
/// a terminal state pays its listed reward exactly once.
struct Mrp {
    int n_states{};
    std::vector<double> transition;  // row-major n_states x n_states
    std::vector<RewardDistribution> rewards;
    double gamma{};
    std::vector<std::uint8_t> terminal_mask;
    /// Optional a-priori return range tighter than [r_min, r_max]/(1-gamma),
    /// when the environment's structure justifies one (e.g. the chain).
    std::optional<std::pair<double, double>> return_range_hint;

    double p(int x, int y) const {
        return transition[static_cast<std::size_t>(x) * n_states + y];
    }

    /// Deterministic reward value (mean for stochastic specs).
    double r(int x) const { return rewards[static_cast<std::size_t>(x)].mean(); }

    bool has_stochastic_rewards() const {
        return std::any_of(rewards.begin(), rewards.end(),
                           [](const RewardDistribution& d) { return !d.is_deterministic(); });
    }

    double reward_min() const {
        double lo = 1.0;
        for (const auto& d : rewards) lo = std::min(lo, d.min());
        return lo;
    }
    double reward_max() const {
        double hi = 0.0;
        for (const auto& d : rewards) hi = std::max(hi, d.max());
        return hi;
    }

    /// Declared return range: the hint when present, otherwise
    /// [r_min, r_max] / (1 - gamma).
    std::pair<double, double> return_range() const {
        if (return_range_hint) return *return_range_hint;
        return {reward_min() / (1.0 - gamma), reward_max() / (1.0 - gamma)};
    }

    Mrp with_gamma(double g) const {
        Mrp out = *this;
        out.gamma = g;
        out.validate();
        return out;
    }

    void validate() const {
        if (n_states < 1) throw std::invalid_argument("Mrp: need at least one state");
        if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("Mrp: gamma outside [0,1)");
        if (transition.size() != static_cast<std::size_t>(n_states) * n_states)
            throw std::invalid_argument("Mrp: transition matrix shape mismatch");
        if (rewards.size() != static_cast<std::size_t>(n_states))
            throw std::invalid_argument("Mrp: rewards size mismatch");
        for (int x = 0; x < n_states; ++x) {
            double row = 0.0;
            for (int y = 0; y < n_states; ++y) {
                const double v = p(x, y);
                if (v < 0.0) throw std::invalid_argument("Mrp: negative transition probability");
                row += v;
            }
            if (std::abs(row - 1.0) > 1e-12)
                throw std::invalid_argument("Mrp: transition row " + std::to_string(x) +
                                            " sums to " + std::to_string(row));
            rewards[static_cast<std::size_t>(x)].validate();
        }
    }
};

// ---------------------------------------------------------------------------
// Benchmark environments
// ---------------------------------------------------------------------------

/// 10-state chain with equal-probability moves to neighbours; states 1 and 10
/// are terminal and only state 10 pays reward 1. A zero-reward absorbing sink
/// is appended as state 11, so n_states == 11.
inline Mrp build_chain(double gamma = 0.9) {
    constexpr int kChain = 10;
    const int n = kChain + 1;  // + sink
    const int sink = kChain;
    Mrp mrp;
    mrp.n_states = n;
    mrp.gamma = gamma;
    mrp.transition.assign(static_cast<std::size_t>(n) * n, 0.0);
    mrp.rewards.assign(static_cast<std::size_t>(n), RewardDistribution::point(0.0));
    mrp.terminal_mask.assign(static_cast<std::size_t>(n), 0);
    auto at = [&](int x, int y) -> double& {
        return mrp.transition[static_cast<std::size_t>(x) * n + y];
    };
    for (int x = 1; x < kChain - 1; ++x) {
        at(x, x - 1) = 0.5;
        at(x, x + 1) = 0.5;
    }
    at(0, sink) = 1.0;
    at(kChain - 1, sink) = 1.0;
    at(sink, sink) = 1.0;
    mrp.rewards[kChain - 1] = RewardDistribution::point(1.0);
    mrp.terminal_mask[0] = 1;
    mrp.terminal_mask[kChain - 1] = 1;
    mrp.terminal_mask[sink] = 1;
    // Returns are 0 or gamma^k for a trajectory absorbed at state 10.
    mrp.return_range_hint = {0.0, 1.0};
    mrp.validate();
    return mrp;
}

/// Transition rows drawn from Dirichlet(concentration, ..., concentration),
/// rewards i.i.d. Uniform[0,1]; deterministic in the seed.
inline Mrp build_random_dirichlet(int n_states, double concentration, std::uint64_t seed,
                                  double gamma = 0.9) {
    if (n_states < 1) throw std::invalid_argument("build_random_dirichlet: n_states < 1");
    if (!(concentration > 0.0))
        throw std::invalid_argument("build_random_dirichlet: concentration must be positive");
    Mrp mrp;
    mrp.n_states = n_states;
    mrp.gamma = gamma;
    mrp.transition.resize(static_cast<std::size_t>(n_states) * n_states);
    mrp.terminal_mask.assign(static_cast<std::size_t>(n_states), 0);
    SplitMix64 trans_rng(fold_in(seed, 0));
    for (int x = 0; x < n_states; ++x) {
        const auto row = sample_dirichlet(trans_rng, n_states, concentration);
        std::copy(row.begin(), row.end(),
                  mrp.transition.begin() + static_cast<std::size_t>(x) * n_states);
    }
    SplitMix64 reward_rng(fold_in(seed, 1));
    mrp.rewards.reserve(static_cast<std::size_t>(n_states));
    for (int x = 0; x < n_states; ++x)
        mrp.rewards.push_back(RewardDistribution::point(reward_rng.next_double()));
    mrp.validate();
    return mrp;
}

/// Two-state MRP with transition [[0.6,0.4],[0.8,0.2]] and rewards (0, 1).
inline Mrp build_two_state(double gamma = 0.9) {
    Mrp mrp;
    mrp.n_states = 2;
    mrp.gamma = gamma;
    mrp.transition = {0.6, 0.4, 0.8, 0.2};
    mrp.rewards = {RewardDistribution::point(0.0), RewardDistribution::point(1.0)};
    mrp.terminal_mask = {0, 0};
    mrp.validate();
    return mrp;
}

// ---------------------------------------------------------------------------
// Environment files (JSON; schema documented in README)
// ---------------------------------------------------------------------------

inline Mrp load_mrp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mrp: cannot open " + path);
    nlohmann::json j;
    in >> j;
    Mrp mrp;
    mrp.n_states = j.at("n_states").get<int>();
    mrp.gamma = j.at("gamma").get<double>();
    const auto& rows = j.at("transition");
    for (const auto& row : rows)
        for (const auto& v : row) mrp.transition.push_back(v.get<double>());
    for (const auto& r : j.at("rewards")) {
        if (r.is_number()) {
            mrp.rewards.push_back(RewardDistribution::point(r.get<double>()));
        } else {
            RewardDistribution d;
            for (const auto& pair : r) {
                d.values.push_back(pair.at(0).get<double>());
                d.probs.push_back(pair.at(1).get<double>());
            }
            mrp.rewards.push_back(std::move(d));
        }
    }
    if (j.contains("terminal"))
        for (const auto& t : j.at("terminal")) mrp.terminal_mask.push_back(t.get<bool>() ? 1 : 0);
    else
        mrp.terminal_mask.assign(static_cast<std::size_t>(mrp.n_states), 0);
    if (j.contains("return_range")) {
        const auto& rr = j.at("return_range");
        mrp.return_range_hint = {rr.at(0).get<double>(), rr.at(1).get<double>()};
    }
    mrp.validate();
    return mrp;
}

inline void save_mrp(const Mrp& mrp, const std::string& path) {
    nlohmann::json j;
    j["n_states"] = mrp.n_states;
    j["gamma"] = mrp.gamma;
    auto rows = nlohmann::json::array();
    for (int x = 0; x < mrp.n_states; ++x) {
        auto row = nlohmann::json::array();
        for (int y = 0; y < mrp.n_states; ++y) row.push_back(mrp.p(x, y));
        rows.push_back(std::move(row));
    }
    j["transition"] = std::move(rows);
    auto rewards = nlohmann::json::array();
    for (const auto& d : mrp.rewards) {
        if (d.is_deterministic()) {
            rewards.push_back(d.values[0]);
        } else {
            auto pairs = nlohmann::json::array();
            for (std::size_t i = 0; i < d.values.size(); ++i)
                pairs.push_back(nlohmann::json::array({d.values[i], d.probs[i]}));
            rewards.push_back(std::move(pairs));
        }
    }
    j["rewards"] = std::move(rewards);
    auto terminal = nlohmann::json::array();
    for (auto t : mrp.terminal_mask) terminal.push_back(t != 0);
    j["terminal"] = std::move(terminal);
    if (mrp.return_range_hint)
        j["return_range"] =
            nlohmann::json::array({mrp.return_range_hint->first, mrp.return_range_hint->second});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mrp: cannot write " + path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Generative-model data
// ---------------------------------------------------------------------------

/// N i.i.d. successor samples per state (and reward samples when the MRP has
/// stochastic rewards). A pure function of (mrp, n, seed).
struct GenerativeDataset {
    int n_states{};
    std::uint64_t n_per_state{};
    std::uint64_t seed{};
    std::vector<std::vector<std::int32_t>> next_states;  // [x][i]
    bool stochastic_rewards{};
    std::vector<std::vector<double>> sampled_rewards;  // filled iff stochastic_rewards
    std::vector<double> det_rewards;                   // r(x) otherwise

    double reward_at(int x, std::size_t i) const {
        return stochastic_rewards ? sampled_rewards[static_cast<std::size_t>(x)][i]
                                  : det_rewards[static_cast<std::size_t>(x)];
    }
};

inline GenerativeDataset sample_dataset(const Mrp& mrp, std::uint64_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n < 1");
    GenerativeDataset ds;
    ds.n_states = mrp.n_states;
    ds.n_per_state = n;
    ds.seed = seed;
    ds.stochastic_rewards = mrp.has_stochastic_rewards();
    ds.next_states.resize(static_cast<std::size_t>(mrp.n_states));
    if (ds.stochastic_rewards)
        ds.sampled_rewards.resize(static_cast<std::size_t>(mrp.n_states));
    else
        for (int x = 0; x < mrp.n_states; ++x) ds.det_rewards.push_back(mrp.r(x));
    for (int x = 0; x < mrp.n_states; ++x) {
        const std::span<const double> row(mrp.transition.data() +
                                              static_cast<std::size_t>(x) * mrp.n_states,
                                          static_cast<std::size_t>(mrp.n_states));
        SplitMix64 succ_rng(fold_in(fold_in(seed, 1), static_cast<std::uint64_t>(x)));
        auto& succ = ds.next_states[static_cast<std::size_t>(x)];
        succ.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i)
            succ.push_back(static_cast<std::int32_t>(sample_index(succ_rng, row)));
        if (ds.stochastic_rewards) {
            const auto& rd = mrp.rewards[static_cast<std::size_t>(x)];
            SplitMix64 rew_rng(fold_in(fold_in(seed, 2), static_cast<std::uint64_t>(x)));
            auto& rew = ds.sampled_rewards[static_cast<std::size_t>(x)];
            rew.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i)
                rew.push_back(rd.values[static_cast<std::size_t>(sample_index(rew_rng, rd.probs))]);
        }
    }
    return ds;
}

/// Empirical transition matrix and per-state empirical reward distributions.
struct EmpiricalModel {
    int n_states{};
    std::vector<double> p_hat;  // row-major
    std::vector<RewardDistribution> reward_dists;

    double p(int x, int y) const {
        return p_hat[static_cast<std::size_t>(x) * n_states + y];
    }
};

inline EmpiricalModel empirical_model(const GenerativeDataset& ds) {
    if (ds.n_states < 1 || ds.n_per_state < 1)
        throw std::invalid_argument("empirical_model: empty dataset");
    EmpiricalModel em;
    em.n_states = ds.n_states;
    em.p_hat.assign(static_cast<std::size_t>(ds.n_states) * ds.n_states, 0.0);
    const double inv_n = 1.0 / static_cast<double>(ds.n_per_state);
    for (int x = 0; x < ds.n_states; ++x) {
        for (const auto y : ds.next_states[static_cast<std::size_t>(x)])
            em.p_hat[static_cast<std::size_t>(x) * ds.n_states + y] += 1.0;
        for (int y = 0; y < ds.n_states; ++y)
            em.p_hat[static_cast<std::size_t>(x) * ds.n_states + y] *= inv_n;
    }
    em.reward_dists.reserve(static_cast<std::size_t>(ds.n_states));
    for (int x = 0; x < ds.n_states; ++x) {
        if (!ds.stochastic_rewards) {
            em.reward_dists.push_back(
                RewardDistribution::point(ds.det_rewards[static_cast<std::size_t>(x)]));
            continue;
        }
        // Uniform over the sampled rewards, duplicates merged.
        std::map<double, std::uint64_t> counts;
        for (const double r : ds.sampled_rewards[static_cast<std::size_t>(x)]) ++counts[r];
        RewardDistribution d;
        for (const auto& [value, count] : counts) {
            d.values.push_back(value);
            d.probs.push_back(static_cast<double>(count) * inv_n);
        }
        em.reward_dists.push_back(std::move(d));
    }
    return em;
}

// ---------------------------------------------------------------------------
// Model view consumed by the solvers
// ---------------------------------------------------------------------------

/// What the categorical and quantile engines actually need: a transition
/// matrix (exact or empirical), reward distributions and a discount.
struct TransitionModel {
    int n_states{};
    double gamma{};
    std::vector<double> transition;  // row-major
    std::vector<RewardDistribution> rewards;

    double p(int x, int y) const {
        return transition[static_cast<std::size_t>(x) * n_states + y];
    }
};

inline TransitionModel make_model(const Mrp& mrp) {
    return {mrp.n_states, mrp.gamma, mrp.transition, mrp.rewards};
}

inline TransitionModel make_model(const EmpiricalModel& em, double gamma) {
    return {em.n_states, gamma, em.p_hat, em.reward_dists};
}

}  // namespace catdp
