#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "catdp/metrics.hpp"
#include "catdp/mrp.hpp"
#include "catdp/rng.hpp"

namespace catdp {

/// Minimal T such that the truncated-return error gamma^T * r_max / (1-gamma)
/// falls below eps. Computed by direct loop to keep edge cases exact.
inline int truncation_horizon(double gamma, double r_max, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("truncation_horizon: eps must be positive");
    double bound = r_max / (1.0 - gamma);
    int t = 0;
    while (bound >= eps) {
        bound *= gamma;
        ++t;
    }
    return t;
}

/// Truncated first-visit Monte-Carlo return samples, one batch per start
/// state. Every rollout starts at its designated state and contributes one
/// return sample to that state only.
struct ReturnSampleSet {
    int n_states{};
    int horizon{};
    double eps{};
    std::size_t n_samples{};
    std::uint64_t seed{};
    std::vector<std::vector<double>> samples;  // per state
};

namespace detail {

inline double rollout_return(const Mrp& mrp, int start, int horizon, SplitMix64& rng) {
    double acc = 0.0;
    double disc = 1.0;
    int state = start;
    for (int t = 0; t < horizon; ++t) {
        const auto& rd = mrp.rewards[static_cast<std::size_t>(state)];
        const double r = rd.is_deterministic()
                             ? rd.values[0]
                             : rd.values[static_cast<std::size_t>(sample_index(rng, rd.probs))];
        acc += disc * r;
        disc *= mrp.gamma;
        const std::span<const double> row(mrp.transition.data() +
                                              static_cast<std::size_t>(state) * mrp.n_states,
                                          static_cast<std::size_t>(mrp.n_states));
        state = sample_index(rng, row);
    }
    return acc;
}

}  // namespace detail

/// Per-rollout seed streams are derived as fold_in(fold_in(seed, state), i),
/// so results are independent of the thread count.
inline ReturnSampleSet mc_returns(const Mrp& mrp, double eps, std::size_t n_samples,
                                  std::uint64_t seed, int n_threads = 1) {
    if (n_samples < 1) throw std::invalid_argument("mc_returns: n_samples < 1");
    ReturnSampleSet rs;
    rs.n_states = mrp.n_states;
    rs.eps = eps;
    rs.n_samples = n_samples;
    rs.seed = seed;
    rs.horizon = truncation_horizon(mrp.gamma, mrp.reward_max(), eps);
    rs.samples.assign(static_cast<std::size_t>(mrp.n_states), {});
    for (auto& s : rs.samples) s.resize(n_samples);

    auto run_state = [&](int x) {
        const std::uint64_t state_key = fold_in(seed, static_cast<std::uint64_t>(x));
        auto& dest = rs.samples[static_cast<std::size_t>(x)];
        for (std::size_t i = 0; i < n_samples; ++i) {
            SplitMix64 rng(fold_in(state_key, static_cast<std::uint64_t>(i)));
            dest[i] = detail::rollout_return(mrp, x, rs.horizon, rng);
        }
    };

    if (n_threads <= 1 || mrp.n_states == 1) {
        for (int x = 0; x < mrp.n_states; ++x) run_state(x);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        const int workers = std::min(n_threads, mrp.n_states);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int x = next.fetch_add(1); x < mrp.n_states; x = next.fetch_add(1))
                    run_state(x);
            });
        for (auto& t : pool) t.join();
    }
    return rs;
}

/// Uniform distribution over the samples, duplicates merged.
inline DiscreteDistribution empirical_distribution(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical_distribution: empty input");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> atoms;
    std::vector<double> probs;
    const double w = 1.0 / static_cast<double>(sorted.size());
    for (const double v : sorted) {
        if (!atoms.empty() && atoms.back() == v)
            probs.back() += w;
        else {
            atoms.push_back(v);
            probs.push_back(w);
        }
    }
    return {std::move(atoms), std::move(probs)};
}

inline std::vector<DiscreteDistribution> empirical_distributions(const ReturnSampleSet& rs) {
    std::vector<DiscreteDistribution> out;
    out.reserve(static_cast<std::size_t>(rs.n_states));
    for (const auto& s : rs.samples) out.push_back(empirical_distribution(s));
    return out;
}

/// CSV dump, schema: state,sample
inline void write_csv(const ReturnSampleSet& rs, std::ostream& out) {
    out << "state,sample\n";
    char buf[64];
    for (int x = 0; x < rs.n_states; ++x)
        for (const double v : rs.samples[static_cast<std::size_t>(x)]) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g\n", x, v);
            out << buf;
        }
}

inline ReturnSampleSet read_return_samples_csv(std::istream& in) {
    ReturnSampleSet rs;
    std::string line;
    if (!std::getline(in, line) || line != "state,sample")
        throw std::runtime_error("read_return_samples_csv: bad header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const int x = std::stoi(line.substr(0, comma));
        const double v = std::stod(line.substr(comma + 1));
        if (x >= static_cast<int>(rs.samples.size())) rs.samples.resize(static_cast<std::size_t>(x) + 1);
        rs.samples[static_cast<std::size_t>(x)].push_back(v);
    }
    rs.n_states = static_cast<int>(rs.samples.size());
    rs.n_samples = rs.n_states > 0 ? rs.samples.front().size() : 0;
    return rs;
}

}  // namespace catdp
