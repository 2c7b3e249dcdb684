#include <gtest/gtest.h>

#include <cmath>

#include "mojet/errors.hpp"
#include "mojet/jets.hpp"
#include "mojet/linalg.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/probes.hpp"
#include "mojet/rng.hpp"

using namespace mojet;

namespace {

Pipeline tanh_net(RngStream& rng, std::size_t d) {
    return Pipeline({Linear{gaussian_matrix(rng, 5, d), gaussian(rng, 5)}, Activation{ActivationFn::kTanh, 5},
                     Linear{gaussian_matrix(rng, 2, 5), std::nullopt}},
                    {Tap{"hidden", 1}, Tap{"out", 2}});
}

}  // namespace

TEST(Probes, IsotropicScaleAndShape) {
    RngStream rng(1, StreamId::kProbes);
    const ProbeBatch b = sample_probes(ProbeDesign::isotropic(0.5, 4000), 3, rng);
    ASSERT_EQ(b.delta.rows(), 4000u);
    ASSERT_EQ(b.delta.cols(), 3u);
    double ss = 0.0;
    for (double v : b.delta.data()) ss += v * v;
    EXPECT_NEAR(std::sqrt(ss / 12000.0), 0.5, 0.02);
}

TEST(Probes, AlignedProbesStayInSubspace) {
    RngStream rng(2, StreamId::kProbes);
    const Matrix basis = Matrix::from_rows({{1, 0, 0, 0}, {0, 0, 1, 0}});
    const ProbeBatch b = sample_probes(ProbeDesign::aligned(basis, 0.1, 16), 4, rng);
    for (std::size_t j = 0; j < b.delta.rows(); ++j) {
        EXPECT_EQ(b.delta(j, 1), 0.0);
        EXPECT_EQ(b.delta(j, 3), 0.0);
    }
    EXPECT_FALSE(check_full_column_rank(b, 1e-10));
    EXPECT_THROW(validate(ProbeDesign::aligned(Matrix::from_rows({{1, 1, 0, 0}}), 0.1)), ValidationError);
    EXPECT_THROW(validate(ProbeDesign::isotropic(0.0)), ValidationError);
    EXPECT_THROW(validate(ProbeDesign::isotropic(0.1, 0)), ValidationError);
}

TEST(Ridge, ScaleAwareLambdaOracle) {
    RngStream rng(3, StreamId::kProbes);
    const ProbeBatch b = sample_probes(ProbeDesign::isotropic(0.2, 12), 5, rng);
    // λ = α · s_max(Δ)² / J.
    const double smax = singular_values(b.delta)[0];
    EXPECT_NEAR(resolve_ridge(ScaleAwareRidge{1e-3}, b), 1e-3 * smax * smax / 12.0, 1e-18);
    EXPECT_EQ(resolve_ridge(FixedRidge{0.25}, b), 0.25);
    EXPECT_EQ(resolve_ridge(ZeroRidge{}, b), 0.0);
    EXPECT_THROW(resolve_ridge(FixedRidge{-1.0}, b), ValidationError);
}

TEST(Jets, ExactOnLinearMapsWithZeroRidge) {
    RngStream rng(4, StreamId::kData);
    RngStream prng(4, StreamId::kProbes);
    const Matrix h = gaussian_matrix(rng, 3, 6);
    const Pipeline p = compose_two_module_linear(h, Vector{1.0, 2.0, 3.0});
    const ProbeBatch b = sample_probes(ProbeDesign::isotropic(1e-2, 10), 6, prng);
    const Jet jet = estimate_jet(p, "bottleneck", gaussian(rng, 6), b, ZeroRidge{});
    EXPECT_LE(relative_frobenius_error(jet.jacobian, h), 1e-11);
    EXPECT_EQ(jet.lambda_used, 0.0);
}

TEST(Jets, ZeroRidgeWithTooFewProbesIsRankDeficient) {
    RngStream prng(5, StreamId::kProbes);
    const ProbeBatch b = sample_probes(ProbeDesign::isotropic(1e-2, 4), 6, prng);
    const Pipeline p = compose_two_module_linear(Matrix::identity(6), Vector(6, 1.0));
    EXPECT_THROW(estimate_jet(p, "bottleneck", Vector(6, 0.0), b, ZeroRidge{}), RankDeficiencyError);
    // A positive ridge still returns a (minimum-norm-like) estimate.
    EXPECT_NO_THROW(estimate_jet(p, "bottleneck", Vector(6, 0.0), b, ScaleAwareRidge{}));
}

TEST(Jets, RidgeShrinksTowardZero) {
    RngStream rng(6, StreamId::kData);
    const Matrix delta = gaussian_matrix(rng, 8, 3);
    const Matrix a_true = gaussian_matrix(rng, 2, 3);
    const Matrix y = delta * a_true.transpose();
    double prev = INFINITY;
    for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
        const double n = frobenius_norm(fit_jacobian(delta, y, lambda));
        EXPECT_LT(n, prev + 1e-12);
        prev = n;
    }
}

TEST(Jets, FiniteDifferenceConsistencyOnTanhNetwork) {
    // Residual of jacobian·δ against the true response is O(σ²): halving σ
    // at least roughly quarters it while above the rounding floor.
    RngStream rng(7, StreamId::kData);
    const Pipeline p = tanh_net(rng, 4);
    const Vector x0 = gaussian(rng, 4);
    const Vector z0 = p.evaluate(x0).taps[0].value;
    double prev = 0.0;
    for (double sigma : {1e-1, 5e-2, 2.5e-2}) {
        RngStream prng(7, StreamId::kProbes);
        const ProbeBatch b = sample_probes(ProbeDesign::isotropic(sigma, 24), 4, prng);
        const Jet jet = estimate_jet(p, "hidden", x0, b, ZeroRidge{});
        double worst = 0.0;
        for (std::size_t j = 0; j < b.delta.rows(); ++j) {
            Vector x = x0;
            for (std::size_t i = 0; i < 4; ++i) x[i] += b.delta(j, i);
            const Vector dz = p.evaluate(x).taps[0].value - z0;
            const Vector pred = jet.jacobian * b.delta.row(j);
            worst = std::max(worst, norm2(dz - pred));
        }
        if (prev > 0.0) {
            EXPECT_LE(worst, prev / 3.5) << "sigma " << sigma;
        }
        prev = worst;
    }
}

TEST(Jets, CountsJPlusOnePassesAndSharesPassesAcrossTaps) {
    RngStream rng(8, StreamId::kData);
    RngStream prng(8, StreamId::kProbes);
    const Pipeline p = tanh_net(rng, 3);
    const ProbeBatch b = sample_probes(ProbeDesign::isotropic(1e-2, 9), 3, prng);
    estimate_jet(p, "hidden", Vector{0, 0, 0}, b, ScaleAwareRidge{});
    EXPECT_EQ(p.read_counter(), 10u);
    const std::vector<std::string> taps{"hidden", "out"};
    const auto jets = estimate_jets(p, taps, Vector{0, 0, 0}, b, ScaleAwareRidge{});
    EXPECT_EQ(p.read_counter(), 20u);
    EXPECT_EQ(jets.size(), 2u);
    EXPECT_EQ(jets[1].jacobian.rows(), 2u);
}

TEST(Jets, SharedVersusPerBaseProbes) {
    RngStream rng(9, StreamId::kData);
    const RngStream prng(9, StreamId::kProbes);
    const auto design = ProbeDesign::isotropic(1e-2, 5);
    const auto a0 = probes_for_base(design, 3, prng, 0, {});
    const auto a1 = probes_for_base(design, 3, prng, 1, {});
    EXPECT_EQ(a0.delta, a1.delta);
    BaseSweepOptions per_base;
    per_base.per_base_probes = true;
    const auto b0 = probes_for_base(design, 3, prng, 0, per_base);
    const auto b1 = probes_for_base(design, 3, prng, 1, per_base);
    EXPECT_NE(b0.delta, b1.delta);
}

TEST(Jets, ParallelSweepMatchesSerialBitForBit) {
    RngStream rng(10, StreamId::kData);
    const Pipeline p = tanh_net(rng, 4);
    std::vector<Vector> bases;
    for (int i = 0; i < 12; ++i) bases.push_back(gaussian(rng, 4));
    const RngStream prng(10, StreamId::kProbes);
    for (bool per_base : {false, true}) {
        BaseSweepOptions serial{per_base, false}, parallel{per_base, true};
        const auto s = estimate_jets_over_bases(p, "hidden", bases, ProbeDesign::isotropic(1e-2, 8),
                                                ScaleAwareRidge{}, prng, serial);
        const auto q = estimate_jets_over_bases(p, "hidden", bases, ProbeDesign::isotropic(1e-2, 8),
                                                ScaleAwareRidge{}, prng, parallel);
        ASSERT_EQ(s.size(), q.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_EQ(s[i].jacobian, q[i].jacobian);
            EXPECT_EQ(s[i].base_point, bases[i]);
        }
    }
}
