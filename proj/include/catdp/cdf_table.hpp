#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "catdp/metrics.hpp"
#include "catdp/support_grid.hpp"

namespace catdp {

/// Per-state CDF values over a support grid: values[x*m + i] = F_i(x),
/// nondecreasing in i with F_{m-1}(x) = 1.
struct CdfTable {
    int n_states{};
    int m{};
    std::vector<double> values;  // row-major n_states x m

    CdfTable() = default;
    CdfTable(int n_states_, int m_)
        : n_states(n_states_), m(m_),
          values(static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(m_), 0.0) {}

    double& at(int x, int i) { return values[static_cast<std::size_t>(x) * m + i]; }
    double at(int x, int i) const { return values[static_cast<std::size_t>(x) * m + i]; }

    std::span<double> row(int x) {
        return {values.data() + static_cast<std::size_t>(x) * m, static_cast<std::size_t>(m)};
    }
    std::span<const double> row(int x) const {
        return {values.data() + static_cast<std::size_t>(x) * m, static_cast<std::size_t>(m)};
    }

    /// Point mass at the first atom for every state (all CDF values 1).
    static CdfTable point_mass_at_first_atom(int n_states, int m) {
        CdfTable t(n_states, m);
        for (auto& v : t.values) v = 1.0;
        return t;
    }

    bool is_valid(double tol = 1e-9) const {
        for (int x = 0; x < n_states; ++x) {
            for (int i = 0; i < m; ++i) {
                const double v = at(x, i);
                if (v < -tol || v > 1.0 + tol) return false;
                if (i > 0 && v < at(x, i - 1) - tol) return false;
            }
            if (std::abs(at(x, m - 1) - 1.0) > 1e-10) return false;
        }
        return true;
    }
};

/// Exact Cramér distance between two CDF rows on the same grid: the CDFs are
/// step functions constant on each cell, so the integral reduces to the first
/// m-1 coordinates weighted by the cell width.
inline double table_cramer(std::span<const double> a, std::span<const double> b, double spacing) {
    if (a.size() != b.size()) throw std::invalid_argument("table_cramer: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc * spacing);
}

/// Supremum over states of table_cramer.
inline double sup_table_cramer(const CdfTable& a, const CdfTable& b, double spacing) {
    if (a.n_states != b.n_states || a.m != b.m)
        throw std::invalid_argument("sup_table_cramer: shape mismatch");
    double worst = 0.0;
    for (int x = 0; x < a.n_states; ++x)
        worst = std::max(worst, table_cramer(a.row(x), b.row(x), spacing));
    return worst;
}

/// Per-state probability masses p_i = F_i - F_{i-1} (with F_{-1} = 0).
inline std::vector<std::vector<double>> decode_pmf(const CdfTable& f) {
    std::vector<std::vector<double>> pmf(static_cast<std::size_t>(f.n_states));
    for (int x = 0; x < f.n_states; ++x) {
        auto& p = pmf[static_cast<std::size_t>(x)];
        p.resize(static_cast<std::size_t>(f.m));
        double prev = 0.0;
        for (int i = 0; i < f.m; ++i) {
            p[static_cast<std::size_t>(i)] = f.at(x, i) - prev;
            prev = f.at(x, i);
        }
    }
    return pmf;
}

/// CDF table from per-state probability masses.
inline CdfTable encode_cdf(const std::vector<std::vector<double>>& pmf) {
    if (pmf.empty()) throw std::invalid_argument("encode_cdf: no states");
    CdfTable f(static_cast<int>(pmf.size()), static_cast<int>(pmf.front().size()));
    for (int x = 0; x < f.n_states; ++x) {
        double acc = 0.0;
        for (int i = 0; i < f.m; ++i) {
            acc += pmf[static_cast<std::size_t>(x)][static_cast<std::size_t>(i)];
            f.at(x, i) = acc;
        }
    }
    return f;
}

/// Decoded distribution of one state as a DiscreteDistribution on the grid.
inline DiscreteDistribution decode_distribution(const CdfTable& f, const SupportGrid& g, int x) {
    std::vector<double> probs(static_cast<std::size_t>(f.m));
    double prev = 0.0;
    for (int i = 0; i < f.m; ++i) {
        probs[static_cast<std::size_t>(i)] = std::max(f.at(x, i) - prev, 0.0);
        prev = f.at(x, i);
    }
    return {g.z, std::move(probs)};
}

inline std::vector<DiscreteDistribution> decode_distributions(const CdfTable& f,
                                                              const SupportGrid& g) {
    std::vector<DiscreteDistribution> out;
    out.reserve(static_cast<std::size_t>(f.n_states));
    for (int x = 0; x < f.n_states; ++x) out.push_back(decode_distribution(f, g, x));
    return out;
}

/// CSV dump, schema: state,atom_index,z,cdf
inline void write_csv(const CdfTable& f, const SupportGrid& g, std::ostream& out) {
    out << "state,atom_index,z,cdf\n";
    char buf[128];
    for (int x = 0; x < f.n_states; ++x)
        for (int i = 0; i < f.m; ++i) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g\n", x, i,
                          g.z[static_cast<std::size_t>(i)], f.at(x, i));
            out << buf;
        }
}

}  // namespace catdp
