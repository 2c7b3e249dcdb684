#pragma once

// Linear two-module pipelines f(x) = wᵀHx with a tap on z = Hx.
//
// Risk alone cannot tell (H, w) apart from (QH, Q⁻ᵀw) for any invertible Q:
// both compose to the same map. Jets at the bottleneck do pin the
// factorization down: their Jacobian is H itself, and w then follows from
// input/output pairs by least squares.

#include <span>
#include <utility>
#include <vector>

#include "mojet/jets.hpp"
#include "mojet/matrix.hpp"
#include "mojet/probes.hpp"
#include "mojet/rng.hpp"

namespace mojet {

inline constexpr double kFullRowRankTol = 1e-8;
inline constexpr double kAffineSpanTol = 1e-8;
inline constexpr double kJacobianSpreadTol = 1e-6;
inline constexpr double kDefaultMirageCondMax = 1e3;

struct LinearFactorization {
    Matrix h;  // r × d
    Vector w;  // r
    bool full_row_rank = false;

    // Validates shapes (r <= d, len(w) == r) and records full_row_rank.
    static LinearFactorization make(Matrix h, Vector w);
    double evaluate(std::span<const double> x) const;
};

struct MirageMember {
    Matrix q;    // r × r, invertible
    Matrix h_q;  // Q·H
    Vector w_q;  // Q⁻ᵀ·w, so that g_Q(z) = wᵀQ⁻¹z
};

MirageMember make_mirage_member(const LinearFactorization& f, const Matrix& q);

// n members with Q = I + G, G Gaussian rescaled to ‖G‖_F = perturbation,
// rejected unless cond(Q) <= cond_max. Throws NumericError when a member
// cannot be found within max_attempts draws.
std::vector<MirageMember> mirage_family(const LinearFactorization& f, std::size_t n,
                                        RngStream& rng, double cond_max = kDefaultMirageCondMax,
                                        double perturbation = 1.0,
                                        std::size_t max_attempts_per_member = 1000);

struct MemberCheck {
    double output_deviation = 0.0;  // max_x |f_Q(x) − f(x)| / max_x |f(x)|
    double h_distance = 0.0;        // ‖H_Q − H‖_F / ‖H‖_F
    double q_distance = 0.0;        // ‖Q − I‖_F
    double condition = 0.0;         // cond(Q)
};

struct MirageVerification {
    std::size_t inputs = 0;
    std::vector<MemberCheck> members;
    double max_output_deviation = 0.0;
    double min_h_distance = 0.0;
};

// Evaluates every member on the rows of `inputs`.
MirageVerification verify_mirage_family(const LinearFactorization& f,
                                        std::span<const MirageMember> members,
                                        const Matrix& inputs);

struct RecoveryReport {
    LinearFactorization factorization;
    double jacobian_spread = 0.0;   // max_s ‖A_s − A_0‖_F / ‖A_0‖_F
    double tap_residual = 0.0;      // max_s ‖z_s − H x_s‖ / max(1, ‖z_s‖)
    double output_residual = 0.0;   // RMS of wᵀHx_i − f(x_i)
};

// Jets must come from the bottleneck tap. Throws NotLinearError when the
// Jacobians differ across bases and UnidentifiableError when H is row-rank
// deficient or the base points do not affinely span the input space.
RecoveryReport recover_factorization(std::span<const Jet> jets,
                                     std::span<const std::pair<Vector, double>> outputs);

// Relative Frobenius error of the λ = 0 jet of the noiseless pipeline z = Hx
// against H. Throws RankDeficiencyError if Δ lacks full column rank.
double corollary_check(const Matrix& h, const ProbeBatch& batch);
double corollary_check(const Matrix& h, const ProbeBatch& batch, std::span<const double> x0);

}  // namespace mojet
