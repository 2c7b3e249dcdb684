#include <gtest/gtest.h>

#include <cmath>

#include "mojet/diagnostics.hpp"
#include "mojet/errors.hpp"
#include "mojet/mojet.hpp"
#include "mojet/rng.hpp"

using namespace mojet;

TEST(Rank, CountsAboveRelativeTolerance) {
    const Matrix a = Matrix::diagonal(Vector{10.0, 1.0, 1e-3, 1e-9});
    EXPECT_EQ(numerical_rank(a, 1e-6).rank, 3u);
    EXPECT_EQ(numerical_rank(a, 1e-2).rank, 2u);
    EXPECT_EQ(numerical_rank(a, 0.5).rank, 1u);
    EXPECT_EQ(numerical_rank(Matrix(3, 3)).rank, 0u);
    EXPECT_THROW(numerical_rank(a, 0.0), ValidationError);
    EXPECT_THROW(numerical_rank(a, 1.0), ValidationError);
}

TEST(JetSim, KnownAngles) {
    const Matrix e1 = Matrix::from_rows({{1, 0, 0}});
    const Matrix e2 = Matrix::from_rows({{0, 1, 0}});
    const Matrix diag = Matrix::from_rows({{1, 1, 0}});
    EXPECT_NEAR(jet_sim(e1, e1).score, 1.0, 1e-15);
    EXPECT_NEAR(jet_sim(e1, e2).score, 0.0, 1e-15);
    EXPECT_NEAR(jet_sim(e1, diag).score, std::sqrt(0.5), 1e-15);
    // Planes sharing one axis and orthogonal in the other: cosines {1, 0}.
    const Matrix p12 = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
    const Matrix p13 = Matrix::from_rows({{1, 0, 0}, {0, 0, 1}});
    const auto r = jet_sim(p12, p13);
    EXPECT_NEAR(r.score, 0.5, 1e-15);
    ASSERT_EQ(r.cosines.size(), 2u);
    EXPECT_NEAR(r.cosines[0], 1.0, 1e-15);
    EXPECT_NEAR(r.cosines[1], 0.0, 1e-15);
}

TEST(JetSim, TruncatesToSmallerRetainedDimension) {
    // Rank 1 versus rank 2: only the leading direction of the larger jet is kept.
    const Matrix a = Matrix::from_rows({{0, 1, 0}});
    const Matrix b = Matrix::from_rows({{3, 0, 0}, {0, 1, 0}});
    const auto r = jet_sim(a, b);
    EXPECT_EQ(r.k_a, 1u);
    EXPECT_EQ(r.k_b, 2u);
    EXPECT_EQ(r.cosines.size(), 1u);
    EXPECT_NEAR(r.score, 0.0, 1e-15);
}

TEST(JetSim, ExplicitKIsCappedAtRank) {
    const Matrix a = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
    const auto r = jet_sim(a, a, ExplicitK{3});
    EXPECT_TRUE(r.capped);
    EXPECT_EQ(r.k_a, 2u);
    EXPECT_FALSE(jet_sim(a, a, ExplicitK{1}).capped);
}

TEST(JetSim, RejectsZeroAndMismatchedJets) {
    EXPECT_THROW(jet_sim(Matrix(2, 3), Matrix::from_rows({{1, 0, 0}})), ValidationError);
    EXPECT_THROW(jet_sim(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{1, 0, 0}})), ValidationError);
}

TEST(JetSim, KSweepIsMonotoneForPairSharingSpectrum) {
    // Two linear maps with the same right singular vectors, ordered by
    // singular value: nested leading subspaces agree for every k.
    RngStream rng(3, StreamId::kData);
    const Matrix v = svd(gaussian_matrix(rng, 6, 6)).vt;
    const Matrix a = Matrix::diagonal(Vector{6, 5, 4, 3, 2, 1}) * v;
    const Matrix b = Matrix::diagonal(Vector{9, 7, 3, 2.5, 0.5, 0.1}) * v;
    double prev = 0.0;
    for (std::size_t k = 1; k <= 6; ++k) {
        const double s = jet_sim(a, b, ExplicitK{k}).score;
        EXPECT_GE(s, prev - 1e-12);
        prev = s;
    }
}

TEST(SelectK, VarianceRule) {
    // Eigenvalues of AᵀA/N proportional to 16, 4, 1 (sum 21) → k = 1 at 0.7, 2 at 0.95, 3 at 0.99.
    const std::vector<Matrix> jac = {Matrix::diagonal(Vector{4.0, 2.0, 1.0})};
    EXPECT_EQ(select_k_variance(jac, 0.7), 1u);
    EXPECT_EQ(select_k_variance(jac, 0.95), 2u);
    EXPECT_EQ(select_k_variance(jac, 0.99), 3u);
}

TEST(Summary, LinearInterpolationPercentiles) {
    const Vector v{4, 1, 3, 2};
    const auto s = summarize(v);
    EXPECT_EQ(s.count, 4u);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_DOUBLE_EQ(s.p25, 1.75);
    EXPECT_DOUBLE_EQ(s.p75, 3.25);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 4.0);
    EXPECT_EQ(summarize(Vector{}).count, 0u);
}

namespace {

DiagnosticsPartial partial(std::vector<std::size_t> ids, std::vector<std::size_t> ra, std::vector<std::size_t> rb,
                           std::vector<double> scores) {
    DiagnosticsPartial p;
    p.channels = {"a/t", "b/t"};
    p.pairs = {{0, 1}};
    for (std::size_t i = 0; i < ids.size(); ++i) {
        BaseDiagnostics b;
        b.base_id = ids[i];
        b.ranks = {RankResult{ra[i], {}, 1e-6}, RankResult{rb[i], {}, 1e-6}};
        if (std::isnan(scores[i])) {
            b.sims.push_back(std::nullopt);
        } else {
            b.sims.push_back(JetSimResult{scores[i], 1, 1, {scores[i]}, false});
        }
        p.bases.push_back(b);
        p.cost.probe_passes += 10;
        p.cost.base_passes += 2;
    }
    return p;
}

}  // namespace

TEST(Aggregate, MergeIsOrderIndependentAndFlagsFollowThresholds) {
    const auto p1 = partial({2, 0}, {3, 3}, {3, 3}, {0.99, 0.97});
    const auto p2 = partial({1}, {3}, {3}, {0.96});
    const std::vector<DiagnosticsPartial> ab{p1, p2}, ba{p2, p1};
    const auto r1 = aggregate(ab), r2 = aggregate(ba);
    ASSERT_EQ(r1.bases.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r1.bases[i].base_id, i);
    EXPECT_DOUBLE_EQ(r1.pair_summaries[0].score_stats.mean, r2.pair_summaries[0].score_stats.mean);
    EXPECT_EQ(r1.cost.probe_passes, 30u);
    EXPECT_EQ(r1.pair_summaries[0].flag, MirageFlag::kMirageLike);

    const std::vector<DiagnosticsPartial> low{partial({0, 1}, {3, 3}, {3, 3}, {0.5, 0.6})};
    EXPECT_EQ(aggregate(low).pair_summaries[0].flag, MirageFlag::kSeparated);
    const std::vector<DiagnosticsPartial> mid{partial({0, 1}, {3, 3}, {3, 3}, {0.8, 0.85})};
    EXPECT_EQ(aggregate(mid).pair_summaries[0].flag, MirageFlag::kMixed);
    const std::vector<DiagnosticsPartial> ranks_differ{partial({0, 1}, {3, 3}, {1, 1}, {0.99, 0.99})};
    EXPECT_EQ(aggregate(ranks_differ).pair_summaries[0].flag, MirageFlag::kSeparated);
    const std::vector<DiagnosticsPartial> undefined{partial({0}, {0}, {3}, {NAN})};
    const auto ru = aggregate(undefined);
    EXPECT_EQ(ru.pair_summaries[0].flag, MirageFlag::kUndefined);
    EXPECT_EQ(ru.pair_summaries[0].undefined, 1u);
}

TEST(Mojet, EndToEndOnLinearModels) {
    RngStream rng(5, StreamId::kData);
    const Matrix h = gaussian_matrix(rng, 2, 5);
    const Pipeline a = compose_two_module_linear(h, Vector{1, 1});
    const Pipeline b = compose_two_module_linear(gaussian_matrix(rng, 3, 3) * Matrix::from_rows({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}}),
                                                 Vector{1, 1, 1});
    std::vector<Vector> bases;
    for (int i = 0; i < 6; ++i) bases.push_back(gaussian(rng, 5));
    const std::vector<TappedModel> models{{"a", &a, {"bottleneck"}}, {"b", &b, {"bottleneck"}}};
    MojetOptions opt;
    opt.design = ProbeDesign::isotropic(1e-2, 8);
    const auto res = run_mojet(models, bases, opt, RngStream(5, StreamId::kProbes));
    EXPECT_EQ(res.channels, (std::vector<std::string>{"a/bottleneck", "b/bottleneck"}));
    EXPECT_EQ(res.report.channel_summaries[0].rank_stats.min, 2.0);
    EXPECT_EQ(res.report.channel_summaries[1].rank_stats.max, 3.0);
    EXPECT_EQ(res.report.cost.probe_passes, 6u * 8u * 2u);
    EXPECT_EQ(res.report.cost.base_passes, 6u * 2u);
    EXPECT_EQ(a.read_counter() + b.read_counter(), 6u * 9u * 2u);

    MojetOptions k1 = opt;
    k1.retain = ExplicitK{1};
    const auto re = rediagnose(res, k1);
    for (const auto& base : re.bases) EXPECT_EQ(base.sims[0]->k_a, 1u);
}

TEST(JetSim, LeftInvarianceWhenRowSpaceIsRetainedInFull) {
    // With k_a <= k_b the whole row space of a is compared, and Q·a has the
    // same row space.
    RngStream rng(9, StreamId::kData);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = gaussian_matrix(rng, 3, 2) * gaussian_matrix(rng, 2, 7);
        const Matrix b = gaussian_matrix(rng, 5, 4) * gaussian_matrix(rng, 4, 7);
        Matrix q = gaussian_matrix(rng, 3, 3);
        for (std::size_t i = 0; i < 3; ++i) q(i, i) += 3.0;
        EXPECT_NEAR(jet_sim(q * a, b).score, jet_sim(a, b).score, 1e-10);
        EXPECT_EQ(numerical_rank(q * a).rank, numerical_rank(a).rank);
    }
}
