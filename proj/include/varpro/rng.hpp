#pragma once

#include "varpro/types.hpp"

#include <cstdint>
#include <random>

namespace varpro {

/// Seedable uniform stream with platform-independent output.
///
/// Generator: std::mt19937_64 seeded through std::seed_seq{seed, stream_id}.
/// Uniform doubles are built from the top 53 bits of each 64-bit draw,
/// so the sequence is identical on every conforming implementation.
/// Distinct stream ids give independent streams for the same seed
/// (e.g. parameter initialization vs. restart perturbations).
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id & 0xffffffffu),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        gen_.seed(seq);
    }

    /// Uniform on [0, 1).
    double next() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double next(double lo, double hi) { return lo + (hi - lo) * next(); }

    /// Fills v with independent uniforms on [lo, hi), in index order.
    void fill(Vector& v, double lo, double hi) {
        for (Index i = 0; i < v.size(); ++i) v[i] = next(lo, hi);
    }

    Vector draw(Index n, double lo, double hi) {
        Vector v(n);
        fill(v, lo, hi);
        return v;
    }

private:
    std::mt19937_64 gen_;
};

/// Stream ids used across the project. Parameter initialization and the
/// restart-perturbation stream must never share a sequence.
namespace stream_id {
inline constexpr std::uint64_t theta_init = 0;
inline constexpr std::uint64_t perturbation = 1;
}  // namespace stream_id

}  // namespace varpro
