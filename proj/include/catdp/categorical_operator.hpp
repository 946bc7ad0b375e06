#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "catdp/cdf_table.hpp"
#include "catdp/linear_solver.hpp"
#include "catdp/mrp.hpp"
#include "catdp/support_grid.hpp"

namespace catdp {

/// Dense per-state cumulative hat matrices H^x with entries
/// H^x[i][j] = E_{R ~ reward(x)}[ G_i(R + gamma * z_j) ], where G_i is the
/// cumulative hat value. Row m-1 is identically 1. Intended for small m;
/// operator construction below never materializes these.
struct CumulativeHatMatrix {
    int n_states{};
    int m{};
    std::vector<std::vector<double>> per_state;  // each m*m row-major

    double at(int x, int i, int j) const {
        return per_state[static_cast<std::size_t>(x)][static_cast<std::size_t>(i) * m + j];
    }
};

inline CumulativeHatMatrix cumulative_hat(const TransitionModel& model, const SupportGrid& grid) {
    CumulativeHatMatrix out;
    out.n_states = model.n_states;
    out.m = grid.m;
    out.per_state.resize(static_cast<std::size_t>(model.n_states));
    for (int x = 0; x < model.n_states; ++x) {
        auto& h = out.per_state[static_cast<std::size_t>(x)];
        h.assign(static_cast<std::size_t>(grid.m) * grid.m, 0.0);
        const auto& rd = model.rewards[static_cast<std::size_t>(x)];
        for (std::size_t a = 0; a < rd.values.size(); ++a) {
            const double r = rd.values[a];
            const double w = rd.probs[a];
            for (int j = 0; j < grid.m; ++j) {
                const double u = r + model.gamma * grid.z[static_cast<std::size_t>(j)];
                for (int i = 0; i < grid.m; ++i)
                    h[static_cast<std::size_t>(i) * grid.m + j] += w * cumulative_hat_value(grid, i, u);
            }
        }
    }
    return out;
}

/// The CDF Bellman operator T_P in sparse form: per-state blocks
/// B_x[i][j] = H^x[i][j] - H^x[i][j+1] (last column H^x[i][m-1]), the mixing
/// transition matrix, and the reduced system (I - T~_P, H~) over the first
/// m-1 CDF coordinates per state.
struct CategoricalOperator {
    int n_states{};
    int m{};
    double gamma{};
    SupportGrid grid;
    std::vector<double> transition;       // row-major copy of P or P-hat
    std::vector<SparseMatrixCsr> blocks;  // full m x m B_x per state
    SparseMatrixCsr reduced_matrix;       // I - T~_P, size n_states*(m-1)
    std::vector<double> reduced_rhs;      // H~(x,i) = H^x[i][m-1]

    double p(int x, int y) const {
        return transition[static_cast<std::size_t>(x) * n_states + y];
    }
    int reduced_unknowns() const { return n_states * (m - 1); }
};

namespace detail {

/// Sparse B_x for one state. Entries are emitted column-by-column; within a
/// column j < m-1 the only rows that can differ between the projected Diracs
/// at r + gamma*z_j and r + gamma*z_{j+1} are the (at most two) cells the two
/// points fall in.
inline SparseMatrixCsr build_block(const RewardDistribution& rd, double gamma,
                                   const SupportGrid& grid) {
    const int m = grid.m;
    struct Entry {
        int i, j;
        double v;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(3) * m);
    std::vector<double> scratch(static_cast<std::size_t>(m), 0.0);

    for (int j = 0; j < m; ++j) {
        int lo = m, hi = -1;
        auto add = [&](int i, double v) {
            if (v <= 0.0) return;
            scratch[static_cast<std::size_t>(i)] += v;
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        };
        for (std::size_t a = 0; a < rd.values.size(); ++a) {
            const double w = rd.probs[a];
            const double u = grid.clamp(rd.values[a] + gamma * grid.z[static_cast<std::size_t>(j)]);
            if (j + 1 < m) {
                const double v =
                    grid.clamp(rd.values[a] + gamma * grid.z[static_cast<std::size_t>(j) + 1]);
                const int k_lo = grid.cell(u);
                const int k_hi = grid.cell(v);
                for (int i = k_lo; i <= k_hi; ++i)
                    add(i, w * (cumulative_hat_value(grid, i, u) - cumulative_hat_value(grid, i, v)));
            } else {
                // Last column carries H^x[i][m-1] itself (H^x[i][m] = 0 by convention).
                for (int i = grid.cell(u); i < m; ++i)
                    add(i, w * cumulative_hat_value(grid, i, u));
            }
        }
        for (int i = lo; i <= hi; ++i) {
            if (scratch[static_cast<std::size_t>(i)] != 0.0)
                entries.push_back({i, j, scratch[static_cast<std::size_t>(i)]});
            scratch[static_cast<std::size_t>(i)] = 0.0;
        }
    }

    // Entries are (j, i)-ordered; counting sort by row keeps columns
    // ascending within each row.
    SparseMatrixCsr csr;
    csr.n = m;
    csr.row_offsets.assign(static_cast<std::size_t>(m) + 1, 0);
    for (const auto& e : entries) ++csr.row_offsets[static_cast<std::size_t>(e.i) + 1];
    for (int r = 0; r < m; ++r)
        csr.row_offsets[static_cast<std::size_t>(r) + 1] += csr.row_offsets[static_cast<std::size_t>(r)];
    csr.col_indices.resize(entries.size());
    csr.values.resize(entries.size());
    std::vector<int> cursor(csr.row_offsets.begin(), csr.row_offsets.end() - 1);
    for (const auto& e : entries) {
        const int pos = cursor[static_cast<std::size_t>(e.i)]++;
        csr.col_indices[static_cast<std::size_t>(pos)] = e.j;
        csr.values[static_cast<std::size_t>(pos)] = e.v;
    }
    return csr;
}

}  // namespace detail

inline CategoricalOperator build_operator(const TransitionModel& model, const SupportGrid& grid) {
    CategoricalOperator op;
    op.n_states = model.n_states;
    op.m = grid.m;
    op.gamma = model.gamma;
    op.grid = grid;
    op.transition = model.transition;
    op.blocks.reserve(static_cast<std::size_t>(model.n_states));
    for (int x = 0; x < model.n_states; ++x)
        op.blocks.push_back(
            detail::build_block(model.rewards[static_cast<std::size_t>(x)], model.gamma, grid));

    // Assemble I - T~_P row by row; unknown (x, i) maps to x*(m-1) + i.
    const int mr = grid.m - 1;
    const int n_unknowns = model.n_states * mr;
    op.reduced_rhs.assign(static_cast<std::size_t>(n_unknowns), 0.0);
    auto& red = op.reduced_matrix;
    red.n = n_unknowns;
    red.row_offsets.assign(static_cast<std::size_t>(n_unknowns) + 1, 0);

    std::vector<std::pair<int, double>> row_buf;
    for (int x = 0; x < model.n_states; ++x) {
        const auto& block = op.blocks[static_cast<std::size_t>(x)];
        for (int i = 0; i < mr; ++i) {
            row_buf.clear();
            row_buf.emplace_back(x * mr + i, 1.0);
            for (int y = 0; y < model.n_states; ++y) {
                const double pxy = model.p(x, y);
                if (pxy == 0.0) continue;
                for (int k = block.row_offsets[static_cast<std::size_t>(i)];
                     k < block.row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
                    const int j = block.col_indices[static_cast<std::size_t>(k)];
                    if (j == grid.m - 1) continue;  // moves to the right-hand side
                    row_buf.emplace_back(y * mr + j, -pxy * block.values[static_cast<std::size_t>(k)]);
                }
            }
            std::sort(row_buf.begin(), row_buf.end());
            for (std::size_t k = 0; k < row_buf.size(); ++k) {
                if (!red.col_indices.empty() &&
                    red.col_indices.back() == row_buf[k].first &&
                    static_cast<int>(red.col_indices.size()) >
                        red.row_offsets[static_cast<std::size_t>(x * mr + i)]) {
                    red.values.back() += row_buf[k].second;
                } else {
                    red.col_indices.push_back(row_buf[k].first);
                    red.values.push_back(row_buf[k].second);
                }
            }
            red.row_offsets[static_cast<std::size_t>(x * mr + i) + 1] =
                static_cast<int>(red.col_indices.size());

            // H~(x, i) = H^x[i][m-1], stored as the last column of B_x.
            const int row_end = block.row_offsets[static_cast<std::size_t>(i) + 1];
            if (row_end > block.row_offsets[static_cast<std::size_t>(i)] &&
                block.col_indices[static_cast<std::size_t>(row_end) - 1] == grid.m - 1)
                op.reduced_rhs[static_cast<std::size_t>(x * mr + i)] =
                    block.values[static_cast<std::size_t>(row_end) - 1];
        }
    }
    return op;
}

/// One application of T_P: F'(x) = B_x (sum_y P(y|x) F(y)).
inline CdfTable apply_operator(const CategoricalOperator& op, const CdfTable& f) {
    if (f.n_states != op.n_states || f.m != op.m)
        throw std::invalid_argument("apply_operator: table shape mismatch");
    CdfTable out(op.n_states, op.m);
    std::vector<double> mixed(static_cast<std::size_t>(op.m));
    for (int x = 0; x < op.n_states; ++x) {
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (int y = 0; y < op.n_states; ++y) {
            const double pxy = op.p(x, y);
            if (pxy == 0.0) continue;
            const auto row = f.row(y);
            for (int i = 0; i < op.m; ++i) mixed[static_cast<std::size_t>(i)] += pxy * row[static_cast<std::size_t>(i)];
        }
        const auto& block = op.blocks[static_cast<std::size_t>(x)];
        const auto dest = out.row(x);
        for (int i = 0; i < op.m; ++i) {
            double acc = 0.0;
            for (int k = block.row_offsets[static_cast<std::size_t>(i)];
                 k < block.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
                acc += block.values[static_cast<std::size_t>(k)] *
                       mixed[static_cast<std::size_t>(block.col_indices[static_cast<std::size_t>(k)])];
            dest[static_cast<std::size_t>(i)] = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense variants (the paper's d-CDP / d-DCFP baselines)
// ---------------------------------------------------------------------------

struct DenseOperator {
    int n_states{};
    int m{};
    double gamma{};
    SupportGrid grid;
    std::vector<double> transition;
    std::vector<DenseMatrix> blocks;  // dense B_x

    double p(int x, int y) const {
        return transition[static_cast<std::size_t>(x) * n_states + y];
    }
};

inline DenseOperator densify_operator(const CategoricalOperator& op) {
    DenseOperator d;
    d.n_states = op.n_states;
    d.m = op.m;
    d.gamma = op.gamma;
    d.grid = op.grid;
    d.transition = op.transition;
    d.blocks.reserve(op.blocks.size());
    for (const auto& b : op.blocks) d.blocks.push_back(densify(b));
    return d;
}

inline CdfTable apply_operator_dense(const DenseOperator& op, const CdfTable& f) {
    CdfTable out(op.n_states, op.m);
    std::vector<double> mixed(static_cast<std::size_t>(op.m));
    for (int x = 0; x < op.n_states; ++x) {
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (int y = 0; y < op.n_states; ++y) {
            const double pxy = op.p(x, y);
            if (pxy == 0.0) continue;
            const auto row = f.row(y);
            for (int i = 0; i < op.m; ++i) mixed[static_cast<std::size_t>(i)] += pxy * row[static_cast<std::size_t>(i)];
        }
        const auto mv = op.blocks[static_cast<std::size_t>(x)].multiply(mixed);
        std::copy(mv.begin(), mv.end(), out.row(x).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// CDP (iterative) and DCFP (direct) solvers
// ---------------------------------------------------------------------------

/// Iterations needed to bring the fixed-point gap below eps * (1-gamma)^{1/2}
/// under the sqrt(gamma) contraction:
/// k = ceil((2 ln(1/eps) + 3 ln(1/(1-gamma))) / ln(1/gamma)).
inline int cdp_iteration_count(double gamma, double eps = 1e-6) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("cdp_iteration_count: eps outside (0,1)");
    if (gamma == 0.0) return 1;
    const double k =
        (2.0 * std::log(1.0 / eps) + 3.0 * std::log(1.0 / (1.0 - gamma))) / std::log(1.0 / gamma);
    return static_cast<int>(std::ceil(k));
}

struct CdpResult {
    CdfTable table;
    std::vector<double> step_l2;  // sup-Cramér step size per iteration
};

inline CdpResult cdp_solve(const CategoricalOperator& op, const CdfTable& f0, int k) {
    if (k < 0) throw std::invalid_argument("cdp_solve: negative iteration count");
    CdpResult res;
    res.table = f0;
    res.step_l2.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
        CdfTable next = apply_operator(op, res.table);
        res.step_l2.push_back(sup_table_cramer(next, res.table, op.grid.spacing));
        res.table = std::move(next);
    }
    return res;
}

inline CdpResult cdp_solve_dense(const DenseOperator& op, const CdfTable& f0, int k) {
    if (k < 0) throw std::invalid_argument("cdp_solve_dense: negative iteration count");
    CdpResult res;
    res.table = f0;
    res.step_l2.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
        CdfTable next = apply_operator_dense(op, res.table);
        res.step_l2.push_back(sup_table_cramer(next, res.table, op.grid.spacing));
        res.table = std::move(next);
    }
    return res;
}

enum class SolverKind { automatic, dense, sparse };

/// Dense solves materialize the reduced matrix; cap the size so a misplaced
/// request fails loudly instead of exhausting memory.
inline constexpr int kMaxDenseUnknowns = 4096;

struct DcfpResult {
    CdfTable table;
    SolveReport report;  // residual measured before sanitation
    SolverKind used{};
};

/// Solves (I - T~_P) F~ = H~ directly, appends F_{m-1}(x) = 1, and sanitizes
/// the solution (clip to [0,1], running max) to remove solver-level noise.
inline DcfpResult dcfp_solve(const CategoricalOperator& op, SolverKind kind = SolverKind::automatic) {
    const int n_unknowns = op.reduced_unknowns();
    SolverKind used = kind;
    if (used == SolverKind::automatic)
        used = n_unknowns <= 2000 ? SolverKind::dense : SolverKind::sparse;

    SolveResult solved;
    if (used == SolverKind::dense) {
        if (n_unknowns > kMaxDenseUnknowns)
            throw std::invalid_argument("dcfp_solve: dense path capped at " +
                                        std::to_string(kMaxDenseUnknowns) +
                                        " unknowns; use the sparse solver");
        solved = solve_dense(densify(op.reduced_matrix), op.reduced_rhs);
    } else {
        solved = solve_sparse(op.reduced_matrix, op.reduced_rhs);
    }

    DcfpResult res;
    res.report = solved.report;
    res.used = used;
    res.table = CdfTable(op.n_states, op.m);
    const int mr = op.m - 1;
    for (int x = 0; x < op.n_states; ++x) {
        const auto row = res.table.row(x);
        double running = 0.0;
        for (int i = 0; i < mr; ++i) {
            double v = solved.x[static_cast<std::size_t>(x) * mr + i];
            v = std::min(std::max(v, 0.0), 1.0);
            running = std::max(running, v);
            row[static_cast<std::size_t>(i)] = running;
        }
        row[static_cast<std::size_t>(mr)] = 1.0;
    }
    return res;
}

inline DcfpResult dcfp_solve(const TransitionModel& model, const SupportGrid& grid,
                             SolverKind kind = SolverKind::automatic) {
    return dcfp_solve(build_operator(model, grid), kind);
}

}  // namespace catdp
