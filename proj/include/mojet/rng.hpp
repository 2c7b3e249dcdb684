#pragma once

// Reproducible random streams.
//
// Generator: xoshiro256** (Blackman & Vigna). The 256-bit state for a
// (seed, stream_id) pair is produced by four successive SplitMix64 outputs
// starting from  seed ^ (stream_id * 0xD1B54A32D192ED03). Uniform doubles use
// the top 53 bits: (x >> 11) * 2^-53. Standard normals use the Box–Muller
// transform on u1 in (0, 1] and u2 in [0, 1):
//     r = sqrt(-2 ln u1), z0 = r cos(2π u2), z1 = r sin(2π u2),
// emitting z0 then z1. Ports that follow these steps reproduce the same
// sequences (up to libm differences in log/cos/sin).

#include <array>
#include <cstdint>
#include <optional>

#include "mojet/matrix.hpp"

namespace mojet {

// Well-known stream ids so that, e.g., drawing more probes never perturbs
// data generation.
enum class StreamId : std::uint64_t {
    kData = 1,
    kProbes = 2,
    kInit = 3,
    kSplit = 4,
    kBases = 5,
    kMirage = 6,
    kShuffle = 7,
};

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);
    RngStream(std::uint64_t seed, StreamId stream)
        : RngStream(seed, static_cast<std::uint64_t>(stream)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    // Independent child stream (same seed, hashed stream id). Used for
    // per-base probe resampling and per-seed experiment replicas.
    RngStream derive(std::uint64_t child) const;

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1).
    double uniform() noexcept;
    // Uniform integer in [0, n) by rejection; n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    double normal() noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    std::optional<double> spare_normal_;
};

// n i.i.d. standard normal samples.
Vector gaussian(RngStream& rng, std::size_t n);
// rows×cols matrix of i.i.d. standard normals, filled row by row.
Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols);

// Deterministic Fisher–Yates permutation of [0, n).
std::vector<std::size_t> permutation(RngStream& rng, std::size_t n);

}  // namespace mojet
