#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "catdp/metrics.hpp"

namespace catdp {

/// m equally spaced atom locations z[0] < ... < z[m-1].
struct SupportGrid {
    int m{};
    std::vector<double> z;
    double spacing{};

    double lo() const { return z.front(); }
    double hi() const { return z.back(); }

    /// Arguments outside [z[0], z[m-1]] are clamped; with the global grid
    /// this never triggers, with env-specific grids it absorbs float drift.
    double clamp(double v) const { return std::min(std::max(v, lo()), hi()); }

    /// Cell index k in [0, m-2] with z[k] <= v <= z[k+1] (after clamping).
    int cell(double v) const {
        const int k = static_cast<int>(std::floor((clamp(v) - lo()) / spacing));
        return std::min(std::max(k, 0), m - 2);
    }

    void validate() const {
        if (m < 2 || static_cast<int>(z.size()) != m)
            throw std::invalid_argument("SupportGrid: need at least 2 atoms");
        if (z.front() < 0.0) throw std::invalid_argument("SupportGrid: z[0] < 0");
        for (int i = 0; i + 1 < m; ++i) {
            const double gap = z[static_cast<std::size_t>(i) + 1] - z[static_cast<std::size_t>(i)];
            if (gap <= 0.0) throw std::invalid_argument("SupportGrid: atoms not increasing");
            if (std::abs(gap - spacing) > 1e-12 * std::max(1.0, spacing))
                throw std::invalid_argument("SupportGrid: atoms not equally spaced");
        }
    }
};

/// m equally spaced atoms on [lo, hi].
inline SupportGrid make_grid_ranged(int m, double lo, double hi) {
    if (m < 2) throw std::invalid_argument("make_grid_ranged: m < 2");
    if (!(lo < hi)) throw std::invalid_argument("make_grid_ranged: lo >= hi");
    SupportGrid g;
    g.m = m;
    g.spacing = (hi - lo) / (m - 1);
    g.z.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) g.z[static_cast<std::size_t>(i)] = lo + g.spacing * i;
    g.z.back() = hi;  // close the range exactly
    g.validate();
    return g;
}

/// The global grid over [0, (1-gamma)^{-1}]: z_i = (i-1)/(m-1) * (1-gamma)^{-1}.
inline SupportGrid make_grid(int m, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("make_grid: gamma outside [0,1)");
    return make_grid_ranged(m, 0.0, 1.0 / (1.0 - gamma));
}

/// Hat function at atom i: 1 at z[i], falling linearly to 0 at the
/// neighbouring atoms, 0 beyond them; the edge atoms keep only their inner
/// slope. Arguments are clamped to the grid range.
inline double hat(const SupportGrid& g, int i, double zval) {
    const double v = g.clamp(zval);
    const double zi = g.z[static_cast<std::size_t>(i)];
    if (v == zi) return 1.0;  // exact atom hit, kept bit-deterministic
    if (v < zi) {
        if (i == 0) return 1.0;  // clamped below the grid
        const double zl = g.z[static_cast<std::size_t>(i) - 1];
        return v <= zl ? 0.0 : std::min((v - zl) / g.spacing, 1.0);
    }
    if (i == g.m - 1) return 1.0;  // clamped above the grid
    const double zr = g.z[static_cast<std::size_t>(i) + 1];
    return v >= zr ? 0.0 : std::min((zr - v) / g.spacing, 1.0);
}

/// Cumulative hat value G_i(z) = sum_{l <= i} h_l(z): equals 1 below z[i],
/// decreases linearly to 0 across [z[i], z[i+1]], and is identically 1 for
/// the last atom. This is the CDF at z[i] of the projected Dirac at z.
inline double cumulative_hat_value(const SupportGrid& g, int i, double zval) {
    if (i >= g.m - 1) return 1.0;
    const double t = (g.z[static_cast<std::size_t>(i) + 1] - g.clamp(zval)) / g.spacing;
    return std::min(std::max(t, 0.0), 1.0);
}

/// Projection of a Dirac at zval onto the grid: mass split between the two
/// neighbouring atoms in proportion to proximity (a single atom when zval
/// lies exactly on it).
struct ProjectedDirac {
    int index[2];
    double mass[2];
    int count{};
};

inline ProjectedDirac project_dirac(const SupportGrid& g, double zval) {
    const double v = g.clamp(zval);
    const int k = g.cell(v);
    const double w_hi = (v - g.z[static_cast<std::size_t>(k)]) / g.spacing;
    ProjectedDirac out{};
    if (w_hi <= 0.0) {
        out.index[0] = k;
        out.mass[0] = 1.0;
        out.count = 1;
    } else if (w_hi >= 1.0) {
        out.index[0] = k + 1;
        out.mass[0] = 1.0;
        out.count = 1;
    } else {
        out.index[0] = k;
        out.mass[0] = 1.0 - w_hi;
        out.index[1] = k + 1;
        out.mass[1] = w_hi;
        out.count = 2;
    }
    return out;
}

/// Projection of a finite discrete distribution: p_i = E[h_i(Z)], i.e. the
/// mixture of projected Diracs over the support.
inline std::vector<double> project_distribution(const SupportGrid& g,
                                                const DiscreteDistribution& dist) {
    std::vector<double> p(static_cast<std::size_t>(g.m), 0.0);
    for (std::size_t k = 0; k < dist.size(); ++k) {
        const ProjectedDirac d = project_dirac(g, dist.atoms()[k]);
        for (int j = 0; j < d.count; ++j)
            p[static_cast<std::size_t>(d.index[j])] += dist.probs()[k] * d.mass[j];
    }
    return p;
}

}  // namespace catdp
