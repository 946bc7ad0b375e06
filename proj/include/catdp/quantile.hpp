#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "catdp/metrics.hpp"
#include "catdp/mrp.hpp"

namespace catdp {

/// Per-state quantile-location estimates at the midpoint levels
/// tau_i = (2i-1)/(2m); rows are nondecreasing.
struct QuantileTable {
    int n_states{};
    int m{};
    std::vector<double> theta;  // row-major

    QuantileTable() = default;
    QuantileTable(int n_states_, int m_, double init)
        : n_states(n_states_), m(m_),
          theta(static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(m_), init) {}

    double& at(int x, int i) { return theta[static_cast<std::size_t>(x) * m + i]; }
    double at(int x, int i) const { return theta[static_cast<std::size_t>(x) * m + i]; }

    std::span<const double> row(int x) const {
        return {theta.data() + static_cast<std::size_t>(x) * m, static_cast<std::size_t>(m)};
    }

    static std::vector<double> taus(int m) {
        std::vector<double> t(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            t[static_cast<std::size_t>(i)] = (2.0 * i + 1.0) / (2.0 * m);
        return t;
    }

    /// The represented distribution: mass 1/m at each theta_i.
    DiscreteDistribution distribution(int x) const {
        std::vector<double> atoms(row(x).begin(), row(x).end());
        std::vector<double> probs(static_cast<std::size_t>(m), 1.0 / m);
        return {std::move(atoms), std::move(probs)};
    }
};

/// One QDP update: for each state, form the mixture of r + gamma*theta_j(y)
/// with weights reward_prob * P(y|x) / m and read off the tau_i-quantiles
/// (left-continuous inverse CDF).
inline QuantileTable qdp_step(const TransitionModel& model, const QuantileTable& table) {
    if (table.n_states != model.n_states)
        throw std::invalid_argument("qdp_step: state count mismatch");
    const int m = table.m;
    const auto taus = QuantileTable::taus(m);
    QuantileTable out(model.n_states, m, 0.0);

    struct Weighted {
        double value, weight;
    };
    std::vector<Weighted> mixture;
    for (int x = 0; x < model.n_states; ++x) {
        mixture.clear();
        const auto& rd = model.rewards[static_cast<std::size_t>(x)];
        for (int y = 0; y < model.n_states; ++y) {
            const double pxy = model.p(x, y);
            if (pxy == 0.0) continue;
            for (std::size_t a = 0; a < rd.values.size(); ++a) {
                const double w = rd.probs[a] * pxy / m;
                for (int j = 0; j < m; ++j)
                    mixture.push_back({rd.values[a] + model.gamma * table.at(y, j), w});
            }
        }
        std::sort(mixture.begin(), mixture.end(),
                  [](const Weighted& a, const Weighted& b) { return a.value < b.value; });
        double cum = 0.0;
        std::size_t k = 0;
        for (int i = 0; i < m; ++i) {
            while (k < mixture.size() && cum < taus[static_cast<std::size_t>(i)])
                cum += mixture[k++].weight;
            // Lowest value with cumulative mass >= tau_i; fp drift in the
            // total mass can leave the last taus unreached.
            const std::size_t idx = k > 0 ? k - 1 : 0;
            out.at(x, i) = mixture[std::min(idx, mixture.size() - 1)].value;
        }
    }
    return out;
}

/// Supremum-w1 between the distributions of two same-shape tables; rows are
/// sorted so this is the mean absolute atom displacement.
inline double sup_w1_between_tables(const QuantileTable& a, const QuantileTable& b) {
    double worst = 0.0;
    for (int x = 0; x < a.n_states; ++x) {
        double acc = 0.0;
        for (int i = 0; i < a.m; ++i) acc += std::abs(a.at(x, i) - b.at(x, i));
        worst = std::max(worst, acc / a.m);
    }
    return worst;
}

/// Iterations for the QDP operator's gamma-contraction in sup-w_infty to
/// shrink the initial gap by 1e-9.
inline int qdp_iteration_count(double gamma) {
    if (gamma == 0.0) return 1;
    return static_cast<int>(std::ceil(std::log(1e9) / std::log(1.0 / gamma)));
}

struct QdpResult {
    QuantileTable table;
    double final_step_w1{};
    int iterations{};
};

/// k QDP iterations from theta == midpoint of the return range.
inline QdpResult qdp_solve(const TransitionModel& model, int m, int k, double range_lo,
                           double range_hi) {
    if (m < 1) throw std::invalid_argument("qdp_solve: m < 1");
    if (k < 0) throw std::invalid_argument("qdp_solve: negative iteration count");
    QdpResult res;
    res.table = QuantileTable(model.n_states, m, 0.5 * (range_lo + range_hi));
    res.iterations = k;
    for (int t = 0; t < k; ++t) {
        QuantileTable next = qdp_step(model, res.table);
        if (t == k - 1) res.final_step_w1 = sup_w1_between_tables(next, res.table);
        res.table = std::move(next);
    }
    return res;
}

/// CSV dump, schema: state,tau,theta
inline void write_csv(const QuantileTable& t, std::ostream& out) {
    out << "state,tau,theta\n";
    const auto taus = QuantileTable::taus(t.m);
    char buf[96];
    for (int x = 0; x < t.n_states; ++x)
        for (int i = 0; i < t.m; ++i) {
            std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", x, taus[static_cast<std::size_t>(i)],
                          t.at(x, i));
            out << buf;
        }
}

}  // namespace catdp
