#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace catdp {

/// SplitMix64 (Steele, Lea, Flood 2014). All sampling in this library runs on
/// this generator so that datasets are bit-reproducible across platforms;
/// std::random distributions are deliberately not used anywhere.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a logarithm argument.
    double next_double_pos() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// Derives an independent stream key from (key, data). Used to split one
/// master seed into per-state / per-sample streams that can run concurrently.
inline std::uint64_t fold_in(std::uint64_t key, std::uint64_t data) {
    SplitMix64 g(key ^ (data * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
    g.next();
    return g.next();
}

/// Standard normal via Box-Muller (two uniforms per draw, no cached spare, so
/// the stream position is a pure function of the call count).
inline double sample_normal(SplitMix64& rng) {
    const double u1 = rng.next_double_pos();
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Gamma(alpha, 1) via Marsaglia-Tsang, with the standard power boost for
/// alpha < 1.
inline double sample_gamma(SplitMix64& rng, double alpha) {
    if (alpha < 1.0) {
        const double u = rng.next_double_pos();
        return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_double_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

/// One Dirichlet(alpha, ..., alpha) draw as normalized independent Gamma
/// variates. With very small concentrations individual components may
/// underflow to exactly zero; an all-zero draw is retried.
inline std::vector<double> sample_dirichlet(SplitMix64& rng, int n, double concentration) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (;;) {
        double sum = 0.0;
        for (auto& v : row) {
            v = sample_gamma(rng, concentration);
            sum += v;
        }
        if (sum > 0.0) {
            for (auto& v : row) v /= sum;
            return row;
        }
    }
}

/// Index draw from a probability row. Probabilities are walked in order, so
/// the draw is deterministic given the stream state.
inline int sample_index(SplitMix64& rng, std::span<const double> probs) {
    const double u = rng.next_double();
    double cum = 0.0;
    int last = -1;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
        if (probs[static_cast<std::size_t>(i)] <= 0.0) continue;
        last = i;
        cum += probs[static_cast<std::size_t>(i)];
        if (u < cum) return i;
    }
    return last;  // u fell into the rounding gap below 1
}

}  // namespace catdp
