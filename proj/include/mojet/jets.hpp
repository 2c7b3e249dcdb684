#pragma once

// Empirical modular jets.
//
// For a tap z(x) and base point x0, run the pipeline on x0 and on x0 + δ_j,
// stack the probes into Δ (J × d) and the responses z(x0+δ_j) − z(x0) into
// Y (J × d_m), and solve the ridge problem
//     min_A ‖Y − Δ Aᵀ‖²_F + λ‖A‖²_F   ⇒   Aᵀ = (ΔᵀΔ + λI)⁻¹ ΔᵀY.
// The jet is the pair (z(x0), A).

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mojet/matrix.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/probes.hpp"
#include "mojet/rng.hpp"

namespace mojet {

inline constexpr double kDefaultRidgeAlpha = 1e-3;

struct ScaleAwareRidge {
    double alpha = kDefaultRidgeAlpha;  // λ = α · λ_max(ΔᵀΔ / J)
};
struct FixedRidge {
    double lambda = 0.0;
};
struct ZeroRidge {};

// Default-constructs to ScaleAwareRidge{1e-3}.
using RidgePolicy = std::variant<ScaleAwareRidge, FixedRidge, ZeroRidge>;

// Throws ValidationError for negative or non-finite λ / α.
double resolve_ridge(const RidgePolicy& policy, const ProbeBatch& batch);

struct Jet {
    std::string tap;
    Vector base_point;  // x0, length d
    Vector base_value;  // z(x0), length d_m
    Matrix jacobian;    // d_m × d
    double lambda_used = 0.0;
};

// Closed-form ridge fit of the Jacobian (d_m × d) from probes (J × d) and
// response differences (J × d_m). With lambda == 0 a rank-deficient ΔᵀΔ is
// reported as RankDeficiencyError, never silently pseudo-inverted.
Matrix fit_jacobian(const Matrix& delta, const Matrix& responses, double lambda);

// One pipeline pass at x0 and one per probe; increments the forward counter
// by J + 1.
Jet estimate_jet(const Pipeline& p, std::string_view tap, std::span<const double> x0,
                 const ProbeBatch& batch, const RidgePolicy& ridge);

// Same passes, every listed tap read from each pass (still J + 1 passes).
std::vector<Jet> estimate_jets(const Pipeline& p, std::span<const std::string> taps,
                               std::span<const double> x0, const ProbeBatch& batch,
                               const RidgePolicy& ridge);

struct BaseSweepOptions {
    // false: one probe batch {δ_j} drawn from `rng` and reused at every base.
    // true: probes redrawn at base s from rng.derive(s).
    bool per_base_probes = false;
    // Estimate bases concurrently; results are still ordered by base index.
    bool parallel = false;
};

// Probe batch used at base index s under the given options.
ProbeBatch probes_for_base(const ProbeDesign& design, std::size_t d, const RngStream& rng,
                           std::size_t base_index, const BaseSweepOptions& options);

std::vector<Jet> estimate_jets_over_bases(const Pipeline& p, std::string_view tap,
                                          std::span<const Vector> bases,
                                          const ProbeDesign& design, const RidgePolicy& ridge,
                                          const RngStream& rng,
                                          const BaseSweepOptions& options = {});

}  // namespace mojet
