#include <gtest/gtest.h>

#include <cmath>

#include "mojet/errors.hpp"
#include "mojet/identifiability.hpp"
#include "mojet/jets.hpp"
#include "mojet/linalg.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/rng.hpp"

using namespace mojet;

namespace {

struct Collected {
    std::vector<Jet> jets;
    std::vector<std::pair<Vector, double>> outputs;
};

Collected collect(const Pipeline& p, std::span<const Vector> bases, RngStream& prng) {
    Collected c;
    for (const auto& x : bases) {
        const ProbeBatch b = sample_probes(ProbeDesign::isotropic(1e-2, x.size() + 3), x.size(), prng);
        c.jets.push_back(estimate_jet(p, "bottleneck", x, b, ZeroRidge{}));
        c.outputs.emplace_back(x, p.evaluate(x).output[0]);
    }
    return c;
}

}  // namespace

TEST(Factorization, ValidatesShapes) {
    EXPECT_THROW(LinearFactorization::make(Matrix(4, 3), Vector(4, 1.0)), ValidationError);
    EXPECT_THROW(LinearFactorization::make(Matrix(2, 3), Vector(3, 1.0)), ValidationError);
    const auto f = LinearFactorization::make(Matrix::from_rows({{1, 0, 0}, {0, 1, 0}}), Vector{2.0, 3.0});
    EXPECT_TRUE(f.full_row_rank);
    EXPECT_DOUBLE_EQ(f.evaluate(Vector{1.0, 1.0, 5.0}), 5.0);
    EXPECT_FALSE(LinearFactorization::make(Matrix::from_rows({{1, 0, 0}, {2, 0, 0}}), Vector{1.0, 1.0}).full_row_rank);
}

TEST(Mirage, MembersComposeToTheSameMap) {
    RngStream rng(1, StreamId::kData);
    RngStream mrng(1, StreamId::kMirage);
    const auto f = LinearFactorization::make(gaussian_matrix(rng, 3, 7), gaussian(rng, 3));
    const auto family = mirage_family(f, 6, mrng, 50.0);
    ASSERT_EQ(family.size(), 6u);
    for (const auto& m : family) {
        EXPECT_LE(condition_number(m.q), 50.0);
        // w_Qᵀ H_Q = wᵀ Q⁻¹ Q H = wᵀ H.
        const Vector lhs = m.h_q.transpose() * m.w_q;
        const Vector rhs = f.h.transpose() * f.w;
        for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-11 * (1.0 + std::abs(rhs[i])));
    }
    const auto v = verify_mirage_family(f, family, gaussian_matrix(rng, 200, 7));
    EXPECT_EQ(v.inputs, 200u);
    EXPECT_LE(v.max_output_deviation, 1e-12);
    EXPECT_GT(v.min_h_distance, 0.0);
}

TEST(Mirage, RejectsSingularQ) {
    RngStream rng(2, StreamId::kData);
    const auto f = LinearFactorization::make(gaussian_matrix(rng, 2, 4), gaussian(rng, 2));
    EXPECT_THROW(make_mirage_member(f, Matrix::from_rows({{1, 1}, {1, 1}})), NumericError);
}

TEST(Recovery, RecoversFactorizationAndIsIdempotent) {
    RngStream rng(3, StreamId::kData);
    RngStream prng(3, StreamId::kProbes);
    const Matrix h = gaussian_matrix(rng, 2, 5);
    const Vector w{0.7, -1.3};
    std::vector<Vector> bases;
    for (int i = 0; i < 8; ++i) bases.push_back(gaussian(rng, 5));
    const Collected c = collect(compose_two_module_linear(h, w), bases, prng);
    const auto rep = recover_factorization(c.jets, c.outputs);
    EXPECT_LE(relative_frobenius_error(rep.factorization.h, h), 1e-10);
    EXPECT_LE(norm2(rep.factorization.w - w) / norm2(w), 1e-10);
    EXPECT_LE(rep.output_residual, 1e-10);

    // Recovering from the recovered pipeline gives the same factorization.
    const Collected again =
        collect(compose_two_module_linear(rep.factorization.h, rep.factorization.w), bases, prng);
    const auto rep2 = recover_factorization(again.jets, again.outputs);
    EXPECT_LE(relative_frobenius_error(rep2.factorization.h, rep.factorization.h), 1e-10);
    EXPECT_LE(norm2(rep2.factorization.w - rep.factorization.w), 1e-10);
}

TEST(Recovery, NonlinearTapIsRejected) {
    RngStream rng(4, StreamId::kData);
    RngStream prng(4, StreamId::kProbes);
    const Pipeline p({Linear{gaussian_matrix(rng, 2, 3), std::nullopt}, Activation{ActivationFn::kTanh, 2},
                      Linear{Matrix::from_rows({{1.0, 1.0}}), std::nullopt}},
                     {Tap{"bottleneck", 1}});
    std::vector<Vector> bases;
    for (int i = 0; i < 6; ++i) bases.push_back(2.0 * gaussian(rng, 3));
    const Collected c = collect(p, bases, prng);
    EXPECT_THROW(recover_factorization(c.jets, c.outputs), NotLinearError);
}

TEST(Recovery, DegenerateBasesAreUnidentifiable) {
    RngStream rng(5, StreamId::kData);
    RngStream prng(5, StreamId::kProbes);
    const Pipeline p = compose_two_module_linear(gaussian_matrix(rng, 2, 4), Vector{1.0, 2.0});
    // Too few bases.
    std::vector<Vector> few{gaussian(rng, 4), gaussian(rng, 4)};
    const Collected a = collect(p, few, prng);
    EXPECT_THROW(recover_factorization(a.jets, a.outputs), UnidentifiableError);
    // Enough bases but all on a line.
    const Vector u = gaussian(rng, 4);
    std::vector<Vector> line;
    for (int i = 0; i < 7; ++i) line.push_back(static_cast<double>(i) * u);
    const Collected b = collect(p, line, prng);
    EXPECT_THROW(recover_factorization(b.jets, b.outputs), UnidentifiableError);
}

TEST(ExactJet, ZeroRidgeJetEqualsH) {
    RngStream rng(6, StreamId::kData);
    RngStream prng(6, StreamId::kProbes);
    for (double sigma : {1e-3, 1e-1, 10.0}) {
        const Matrix h = gaussian_matrix(rng, 4, 6);
        const ProbeBatch b = sample_probes(ProbeDesign::isotropic(sigma, 6), 6, prng);
        EXPECT_LE(corollary_check(h, b), 1e-10);
        EXPECT_LE(corollary_check(h, b, gaussian(rng, 6)), 1e-10);
    }
    const ProbeBatch thin = sample_probes(ProbeDesign::isotropic(1e-2, 3), 6, prng);
    EXPECT_THROW(corollary_check(gaussian_matrix(rng, 4, 6), thin), RankDeficiencyError);
}
