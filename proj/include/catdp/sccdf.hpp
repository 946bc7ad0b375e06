#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "catdp/categorical_operator.hpp"
#include "catdp/cdf_table.hpp"
#include "catdp/linear_solver.hpp"
#include "catdp/rng.hpp"

namespace catdp {

/// A single-sample CDF operator: one sampled successor per state (a one-hot
/// transition matrix) reusing the base operator's B_x blocks. Holds a
/// reference to the base operator, which must outlive it.
struct SingleSampleOperator {
    const CategoricalOperator* base{};
    std::vector<std::int32_t> successor;  // one per state
};

inline SingleSampleOperator draw_single_sample_operator(const CategoricalOperator& op,
                                                        SplitMix64& rng) {
    SingleSampleOperator s;
    s.base = &op;
    s.successor.reserve(static_cast<std::size_t>(op.n_states));
    for (int x = 0; x < op.n_states; ++x) {
        const std::span<const double> row(op.transition.data() +
                                              static_cast<std::size_t>(x) * op.n_states,
                                          static_cast<std::size_t>(op.n_states));
        s.successor.push_back(static_cast<std::int32_t>(sample_index(rng, row)));
    }
    return s;
}

/// (T-hat F)(x) = B_x F(X'_x).
inline CdfTable apply_single_sample(const SingleSampleOperator& s, const CdfTable& f) {
    const CategoricalOperator& op = *s.base;
    CdfTable out(op.n_states, op.m);
    for (int x = 0; x < op.n_states; ++x) {
        const auto src = f.row(s.successor[static_cast<std::size_t>(x)]);
        const auto& block = op.blocks[static_cast<std::size_t>(x)];
        const auto dest = out.row(x);
        for (int i = 0; i < op.m; ++i) {
            double acc = 0.0;
            for (int k = block.row_offsets[static_cast<std::size_t>(i)];
                 k < block.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
                acc += block.values[static_cast<std::size_t>(k)] *
                       src[static_cast<std::size_t>(block.col_indices[static_cast<std::size_t>(k)])];
            dest[static_cast<std::size_t>(i)] = acc;
        }
    }
    return out;
}

/// One approximate draw from the stochastic categorical CDF fixed-point
/// distribution: k independent single-sample operators composed onto the
/// fixed point F^Q. Distributional bias decays as gamma^{k/2}.
struct PhiSample {
    CdfTable table;
    int k_used{};
};

inline PhiSample sample_phi(const CategoricalOperator& op, const CdfTable& fq, int k,
                            SplitMix64& rng) {
    if (k < 1) throw std::invalid_argument("sample_phi: k < 1");
    PhiSample phi;
    phi.table = fq;
    phi.k_used = k;
    for (int t = 0; t < k; ++t) {
        const SingleSampleOperator s = draw_single_sample_operator(op, rng);
        phi.table = apply_single_sample(s, phi.table);
    }
    return phi;
}

/// Local squared-Cramér variation, computed exactly:
/// sigma(x) = sum_y Q(y|x) * l2^2(B_x F^Q(y), F^Q(x)).
inline std::vector<double> local_variation_exact(const CategoricalOperator& op,
                                                 const CdfTable& fq) {
    std::vector<double> sigma(static_cast<std::size_t>(op.n_states), 0.0);
    std::vector<double> backed(static_cast<std::size_t>(op.m));
    for (int x = 0; x < op.n_states; ++x) {
        const auto& block = op.blocks[static_cast<std::size_t>(x)];
        for (int y = 0; y < op.n_states; ++y) {
            const double q = op.p(x, y);
            if (q == 0.0) continue;
            const auto src = fq.row(y);
            for (int i = 0; i < op.m; ++i) {
                double acc = 0.0;
                for (int k = block.row_offsets[static_cast<std::size_t>(i)];
                     k < block.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
                    acc += block.values[static_cast<std::size_t>(k)] *
                           src[static_cast<std::size_t>(block.col_indices[static_cast<std::size_t>(k)])];
                backed[static_cast<std::size_t>(i)] = acc;
            }
            const double d = table_cramer(backed, fq.row(x), op.grid.spacing);
            sigma[static_cast<std::size_t>(x)] += q * d * d;
        }
    }
    return sigma;
}

/// Monte-Carlo estimate of the global squared-Cramér variation
/// Sigma(x) = E[l2^2(Phi(x), F^Q(x))] with per-state standard errors.
struct GlobalVariationResult {
    std::vector<double> sigma_global;
    std::vector<double> std_error;
    std::size_t n_phi{};
    int depth{};
};

inline GlobalVariationResult global_variation_mc(const CategoricalOperator& op, const CdfTable& fq,
                                                 std::size_t n_phi, int k, std::uint64_t seed,
                                                 int n_threads = 1) {
    if (n_phi < 1) throw std::invalid_argument("global_variation_mc: n_phi < 1");
    const std::size_t n_states = static_cast<std::size_t>(op.n_states);

    // Fixed-size chunks combined in index order keep the reduction bitwise
    // identical for every thread count.
    constexpr std::size_t kChunk = 512;
    const std::size_t n_chunks = (n_phi + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> chunk_sum(n_chunks, std::vector<double>(n_states, 0.0));
    std::vector<std::vector<double>> chunk_sq = chunk_sum;

    auto accumulate_chunk = [&](std::size_t c) {
        auto& s = chunk_sum[c];
        auto& s2 = chunk_sq[c];
        const std::size_t hi = std::min(n_phi, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < hi; ++i) {
            SplitMix64 rng(fold_in(seed, static_cast<std::uint64_t>(i)));
            const PhiSample phi = sample_phi(op, fq, k, rng);
            for (int x = 0; x < op.n_states; ++x) {
                const double d = table_cramer(phi.table.row(x), fq.row(x), op.grid.spacing);
                s[static_cast<std::size_t>(x)] += d * d;
                s2[static_cast<std::size_t>(x)] += d * d * d * d;
            }
        }
    };

    if (n_threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) accumulate_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_chunks);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
                    accumulate_chunk(c);
            });
        for (auto& t : pool) t.join();
    }
    std::vector<double> sum(n_states, 0.0), sum_sq(n_states, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c)
        for (std::size_t x = 0; x < n_states; ++x) {
            sum[x] += chunk_sum[c][x];
            sum_sq[x] += chunk_sq[c][x];
        }

    GlobalVariationResult res;
    res.n_phi = n_phi;
    res.depth = k;
    res.sigma_global.resize(n_states);
    res.std_error.resize(n_states);
    const double n = static_cast<double>(n_phi);
    for (std::size_t x = 0; x < n_states; ++x) {
        const double mean = sum[x] / n;
        const double var = std::max(sum_sq[x] / n - mean * mean, 0.0);
        res.sigma_global[x] = mean;
        res.std_error[x] = std::sqrt(var / n);
    }
    return res;
}

/// Local and global variation bundled for reporting.
struct VariationVectors {
    std::vector<double> sigma;
    std::vector<double> sigma_global;
    std::vector<double> std_error;
    std::size_t n_phi{};
};

/// Per-state slack of the variation Bellman inequality:
/// Sigma - sigma - gamma*Q*Sigma + (2/(m sqrt(1-gamma)) + 1/(m^2 (1-gamma)^2)).
/// Nonnegative in exact arithmetic; MC noise in Sigma is the only source of
/// negative values.
inline std::vector<double> check_scc_inequality(const CategoricalOperator& op,
                                                std::span<const double> sigma,
                                                std::span<const double> sigma_global) {
    if (static_cast<int>(sigma.size()) != op.n_states ||
        static_cast<int>(sigma_global.size()) != op.n_states)
        throw std::invalid_argument("check_scc_inequality: vector size mismatch");
    const double one_minus = 1.0 - op.gamma;
    const double correction = 2.0 / (op.m * std::sqrt(one_minus)) +
                              1.0 / (static_cast<double>(op.m) * op.m * one_minus * one_minus);
    std::vector<double> slack(static_cast<std::size_t>(op.n_states));
    for (int x = 0; x < op.n_states; ++x) {
        double mixed = 0.0;
        for (int y = 0; y < op.n_states; ++y)
            mixed += op.p(x, y) * sigma_global[static_cast<std::size_t>(y)];
        slack[static_cast<std::size_t>(x)] = sigma_global[static_cast<std::size_t>(x)] -
                                             sigma[static_cast<std::size_t>(x)] -
                                             op.gamma * mixed + correction;
    }
    return slack;
}

struct CorollaryBound {
    double value{};  // ||(I - gamma Q)^{-1} sigma||_inf
    double bound{};  // 2 / (1 - gamma)
    bool holds{};
};

/// Requires m >= 4 (1-gamma)^{-2} eps^{-2} + 1 for the configured eps in (0,1].
inline CorollaryBound check_corollary_bound(const CategoricalOperator& op,
                                            std::span<const double> sigma, double eps) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("check_corollary_bound: eps outside (0,1]");
    const double one_minus = 1.0 - op.gamma;
    const double m_min = 4.0 / (one_minus * one_minus * eps * eps) + 1.0;
    if (op.m < m_min * (1.0 - 1e-12))
        throw std::invalid_argument("check_corollary_bound: m below the precondition threshold " +
                                    std::to_string(m_min));
    DenseMatrix a(op.n_states);
    for (int x = 0; x < op.n_states; ++x)
        for (int y = 0; y < op.n_states; ++y)
            a.at(x, y) = (x == y ? 1.0 : 0.0) - op.gamma * op.p(x, y);
    const auto solved = solve_dense(a, sigma);
    CorollaryBound out;
    for (const double v : solved.x) out.value = std::max(out.value, std::abs(v));
    out.bound = 2.0 / one_minus;
    out.holds = out.value <= out.bound * (1.0 + 1e-12);
    return out;
}

}  // namespace catdp
