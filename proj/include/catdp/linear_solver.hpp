#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace catdp {

/// Square matrix in compressed-sparse-row form. Column indices are strictly
/// increasing within each row.
struct SparseMatrixCsr {
    int n{};
    std::vector<int> row_offsets;  // size n + 1
    std::vector<int> col_indices;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    void validate() const {
        if (row_offsets.size() != static_cast<std::size_t>(n) + 1)
            throw std::invalid_argument("SparseMatrixCsr: row_offsets size mismatch");
        if (row_offsets.front() != 0 || row_offsets.back() != static_cast<int>(values.size()) ||
            col_indices.size() != values.size())
            throw std::invalid_argument("SparseMatrixCsr: structural inconsistency");
        for (int r = 0; r < n; ++r) {
            if (row_offsets[static_cast<std::size_t>(r) + 1] < row_offsets[static_cast<std::size_t>(r)])
                throw std::invalid_argument("SparseMatrixCsr: decreasing row offsets");
            int prev = -1;
            for (int k = row_offsets[static_cast<std::size_t>(r)];
                 k < row_offsets[static_cast<std::size_t>(r) + 1]; ++k) {
                const int c = col_indices[static_cast<std::size_t>(k)];
                if (c <= prev || c >= n)
                    throw std::invalid_argument("SparseMatrixCsr: bad column index");
                prev = c;
            }
        }
    }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            double acc = 0.0;
            for (int k = row_offsets[static_cast<std::size_t>(r)];
                 k < row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
                acc += values[static_cast<std::size_t>(k)] *
                       x[static_cast<std::size_t>(col_indices[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(r)] = acc;
        }
        return y;
    }
};

struct DenseMatrix {
    int n{};
    std::vector<double> a;  // row-major

    DenseMatrix() = default;
    explicit DenseMatrix(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * n + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * n + c]; }

    std::vector<double> multiply(std::span<const double> x) const {
        std::vector<double> y(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            double acc = 0.0;
            const double* row = a.data() + static_cast<std::size_t>(r) * n;
            for (int c = 0; c < n; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc;
        }
        return y;
    }
};

inline DenseMatrix densify(const SparseMatrixCsr& s) {
    DenseMatrix d(s.n);
    for (int r = 0; r < s.n; ++r)
        for (int k = s.row_offsets[static_cast<std::size_t>(r)];
             k < s.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            d.at(r, s.col_indices[static_cast<std::size_t>(k)]) = s.values[static_cast<std::size_t>(k)];
    return d;
}

struct SolveReport {
    double residual_inf{};
    double factor_seconds{};
    double solve_seconds{};
    std::int64_t nnz_factor{};  // sparse path only
};

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

namespace detail {

inline double residual_inf_norm(std::span<const double> ax, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(ax[i] - b[i]));
    return worst;
}

using SolverClock = std::chrono::steady_clock;

inline double seconds_since(SolverClock::time_point t0) {
    return std::chrono::duration<double>(SolverClock::now() - t0).count();
}

}  // namespace detail

/// LU with partial pivoting. Throws on exact singularity (zero pivot).
inline SolveResult solve_dense(const DenseMatrix& a, std::span<const double> b) {
    const int n = a.n;
    if (static_cast<int>(b.size()) != n)
        throw std::invalid_argument("solve_dense: rhs size mismatch");
    SolveResult res;
    auto t0 = detail::SolverClock::now();

    std::vector<double> lu = a.a;
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    auto at = [&](int r, int c) -> double& { return lu[static_cast<std::size_t>(r) * n + c]; };

    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(at(k, k));
        for (int r = k + 1; r < n; ++r) {
            const double v = std::abs(at(r, k));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0)
            throw std::runtime_error("solve_dense: matrix is singular to working precision");
        if (piv != k) {
            for (int c = 0; c < n; ++c) std::swap(at(k, c), at(piv, c));
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(piv)]);
        }
        const double inv_piv = 1.0 / at(k, k);
        for (int r = k + 1; r < n; ++r) {
            const double f = at(r, k) * inv_piv;
            at(r, k) = f;
            if (f == 0.0) continue;
            for (int c = k + 1; c < n; ++c) at(r, c) -= f * at(k, c);
        }
    }
    res.report.factor_seconds = detail::seconds_since(t0);

    t0 = detail::SolverClock::now();
    std::vector<double>& x = res.x;
    x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (int r = 1; r < n; ++r) {
        double acc = x[static_cast<std::size_t>(r)];
        for (int c = 0; c < r; ++c) acc -= at(r, c) * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc;
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = x[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) acc -= at(r, c) * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc / at(r, r);
    }
    res.report.solve_seconds = detail::seconds_since(t0);

    res.report.residual_inf = detail::residual_inf_norm(a.multiply(res.x), b);
    return res;
}

/// Direct sparse LU with COLAMD fill-reducing column ordering (Eigen).
inline SolveResult solve_sparse(const SparseMatrixCsr& a, std::span<const double> b) {
    if (static_cast<int>(b.size()) != a.n)
        throw std::invalid_argument("solve_sparse: rhs size mismatch");
    SolveResult res;
    auto t0 = detail::SolverClock::now();

    Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> mapped(
        a.n, a.n, static_cast<int>(a.nnz()), a.row_offsets.data(), a.col_indices.data(),
        a.values.data());
    Eigen::SparseMatrix<double> mat = mapped;  // to column-major for SparseLU

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
    solver.analyzePattern(mat);
    solver.factorize(mat);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("solve_sparse: factorization failed (singular to working precision)");
    res.report.factor_seconds = detail::seconds_since(t0);
    res.report.nnz_factor = static_cast<std::int64_t>(solver.nnzL() + solver.nnzU());

    t0 = detail::SolverClock::now();
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), a.n);
    Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("solve_sparse: back-substitution failed");
    res.report.solve_seconds = detail::seconds_since(t0);

    res.x.assign(x.data(), x.data() + a.n);
    res.report.residual_inf = detail::residual_inf_norm(a.multiply(res.x), b);
    return res;
}

}  // namespace catdp
