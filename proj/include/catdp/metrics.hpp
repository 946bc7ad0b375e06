#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace catdp {

/// Finite discrete distribution with strictly increasing support. The
/// constructor sorts, merges duplicate atoms and drops zero-mass atoms, then
/// normalizes away sub-1e-12 rounding in the total mass.
class DiscreteDistribution {
public:
    DiscreteDistribution(std::vector<double> atoms, std::vector<double> probs) {
        if (atoms.size() != probs.size())
            throw std::invalid_argument("DiscreteDistribution: atoms/probs size mismatch");
        if (atoms.empty())
            throw std::invalid_argument("DiscreteDistribution: empty support");
        std::vector<std::size_t> order(atoms.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
        double total = 0.0;
        for (std::size_t k : order) {
            const double p = probs[k];
            if (p < 0.0) throw std::invalid_argument("DiscreteDistribution: negative mass");
            if (p == 0.0) continue;
            if (!atoms_.empty() && atoms[k] == atoms_.back()) {
                probs_.back() += p;
            } else {
                atoms_.push_back(atoms[k]);
                probs_.push_back(p);
            }
            total += p;
        }
        if (atoms_.empty() || std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("DiscreteDistribution: masses sum to " + std::to_string(total));
        for (auto& p : probs_) p /= total;
    }

    static DiscreteDistribution point(double v) { return {{v}, {1.0}}; }

    const std::vector<double>& atoms() const { return atoms_; }
    const std::vector<double>& probs() const { return probs_; }
    std::size_t size() const { return atoms_.size(); }
    double min() const { return atoms_.front(); }
    double max() const { return atoms_.back(); }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) m += atoms_[i] * probs_[i];
        return m;
    }

private:
    std::vector<double> atoms_;
    std::vector<double> probs_;
};

namespace detail {

/// Integrates f(F_a(t) - F_b(t)) dt over the merged support. Both CDFs are
/// step functions, so the integral is an exact finite sum.
template <typename F>
double cdf_gap_integral(const DiscreteDistribution& a, const DiscreteDistribution& b, F&& f) {
    const auto& za = a.atoms();
    const auto& zb = b.atoms();
    std::size_t ia = 0, ib = 0;
    double fa = 0.0, fb = 0.0;
    double prev = std::min(za.front(), zb.front());
    double acc = 0.0;
    while (ia < za.size() || ib < zb.size()) {
        double t;
        if (ib >= zb.size() || (ia < za.size() && za[ia] <= zb[ib]))
            t = za[ia];
        else
            t = zb[ib];
        acc += f(fa - fb) * (t - prev);
        while (ia < za.size() && za[ia] == t) fa += a.probs()[ia++];
        while (ib < zb.size() && zb[ib] == t) fb += b.probs()[ib++];
        prev = t;
    }
    return acc;
}

}  // namespace detail

/// Cramér distance: [ \int (F_a - F_b)^2 dt ]^{1/2}, computed exactly.
inline double cramer(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    return std::sqrt(detail::cdf_gap_integral(a, b, [](double d) { return d * d; }));
}

/// Wasserstein-1 distance: \int |F_a - F_b| dt, computed exactly.
inline double wasserstein1(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    return detail::cdf_gap_integral(a, b, [](double d) { return std::abs(d); });
}

enum class BaseMetric { cramer, w1 };

/// Supremum (over states) of a per-state base metric.
inline double sup_metric(std::span<const DiscreteDistribution> a,
                         std::span<const DiscreteDistribution> b, BaseMetric which) {
    if (a.size() != b.size())
        throw std::invalid_argument("sup_metric: state count mismatch");
    double worst = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) {
        const double d = which == BaseMetric::cramer ? cramer(a[x], b[x]) : wasserstein1(a[x], b[x]);
        worst = std::max(worst, d);
    }
    return worst;
}

struct W1CramerBound {
    bool holds{};
    double slack{};  // bound - w1
    double w1{};
    double l2{};
};

/// Checks w1 <= (1-gamma)^{-1/2} * l2 for distributions supported on
/// [0, (1-gamma)^{-1}].
inline W1CramerBound check_w1_cramer_bound(const DiscreteDistribution& a,
                                           const DiscreteDistribution& b, double gamma) {
    const double range = 1.0 / (1.0 - gamma);
    const double tol = 1e-9 * std::max(1.0, range);
    if (a.min() < -tol || a.max() > range + tol || b.min() < -tol || b.max() > range + tol)
        throw std::invalid_argument("check_w1_cramer_bound: support outside [0, (1-gamma)^{-1}]");
    W1CramerBound out;
    out.w1 = wasserstein1(a, b);
    out.l2 = cramer(a, b);
    const double bound = std::sqrt(range) * out.l2;
    out.slack = bound - out.w1;
    out.holds = out.w1 <= bound + 1e-12 * std::max(1.0, bound);
    return out;
}

}  // namespace catdp
