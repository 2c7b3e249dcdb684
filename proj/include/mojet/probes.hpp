#pragma once

// Perturbation designs {δ_j} and the probe matrix Δ (one probe per row).

#include <cstddef>
#include <variant>

#include "mojet/matrix.hpp"
#include "mojet/rng.hpp"

namespace mojet {

inline constexpr std::size_t kDefaultProbeCount = 32;
inline constexpr double kDefaultProbeScale = 1e-2;

// δ ~ N(0, σ² I_d).
struct Isotropic {
    double sigma = kDefaultProbeScale;
};

// δ = σ · cᵀ·basis with c ~ N(0, I_k); basis rows orthonormal (k × d).
// Coefficients are not normalized.
struct SubspaceAligned {
    Matrix basis;
    double sigma = kDefaultProbeScale;
};

// Probes given verbatim, one per row.
struct ExplicitBasis {
    Matrix deltas;
};

struct ProbeDesign {
    std::variant<Isotropic, SubspaceAligned, ExplicitBasis> kind;
    std::size_t count = kDefaultProbeCount;

    static ProbeDesign isotropic(double sigma, std::size_t count = kDefaultProbeCount);
    static ProbeDesign aligned(Matrix basis, double sigma, std::size_t count = kDefaultProbeCount);
    static ProbeDesign explicit_basis(Matrix deltas);

    // Same design with a different probe scale (no-op for explicit probes).
    ProbeDesign with_sigma(double sigma) const;
    ProbeDesign with_count(std::size_t count) const;
};

struct ProbeBatch {
    Matrix delta;  // J × d
    ProbeDesign design;
};

// Throws ValidationError for non-positive sigma, zero count, non-orthonormal
// aligned basis, or non-finite explicit probes.
void validate(const ProbeDesign& design);

ProbeBatch sample_probes(const ProbeDesign& design, std::size_t d, RngStream& rng);

// True iff the smallest singular value of Δ exceeds tol_rel times the largest
// (always false when J < d).
bool check_full_column_rank(const ProbeBatch& batch, double tol_rel);

}  // namespace mojet
