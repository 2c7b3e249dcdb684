#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "mojet/errors.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/rng.hpp"
#include "mojet/serialization.hpp"

using namespace mojet;

namespace {

Pipeline small_mlp(RngStream& rng) {
    return Pipeline({Standardize{{0.5, -1.0, 2.0}, {1.0, 2.0, 0.5}},
                     Linear{gaussian_matrix(rng, 4, 3), gaussian(rng, 4)},
                     Activation{ActivationFn::kTanh, 4},
                     Linear{gaussian_matrix(rng, 2, 4), std::nullopt},
                     Activation{ActivationFn::kRelu, 2},
                     LogisticHead{gaussian_matrix(rng, 3, 2), gaussian(rng, 3)}},
                    {Tap{"hidden", 2}, Tap{"bottleneck", 4}});
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Pipeline, EvaluatesModulesInOrderAndRecordsTaps) {
    const Pipeline p({Linear{Matrix::from_rows({{1, 2}, {0, -1}}), Vector{1, 0}},
                      Activation{ActivationFn::kRelu, 2}, Identity{2}},
                     {Tap{"pre", 0}, Tap{"post", 1}});
    const auto e = p.evaluate(Vector{1.0, 1.0});
    EXPECT_EQ(e.output, (Vector{4.0, 0.0}));
    ASSERT_EQ(e.taps.size(), 2u);
    EXPECT_EQ(e.taps[0].tap_id, "pre");
    EXPECT_EQ(e.taps[0].value, (Vector{4.0, -1.0}));
    EXPECT_EQ(e.taps[1].value, (Vector{4.0, 0.0}));
    EXPECT_EQ(p.tap_dim("post"), 2u);
    EXPECT_THROW(p.tap_position("missing"), ValidationError);
}

TEST(Pipeline, CountsEveryForwardPass) {
    RngStream rng(1, StreamId::kData);
    const Pipeline p = small_mlp(rng);
    EXPECT_EQ(p.read_counter(), 0u);
    for (int i = 0; i < 7; ++i) p.evaluate(Vector{0.1, 0.2, 0.3});
    EXPECT_EQ(p.read_counter(), 7u);
    Pipeline copy = p;
    copy.reset_counter();
    EXPECT_EQ(copy.read_counter(), 0u);
    EXPECT_EQ(p.read_counter(), 7u);
}

TEST(Pipeline, RejectsBadShapesAndNonFiniteValues) {
    EXPECT_THROW(Pipeline({Linear{Matrix(2, 3), std::nullopt}, Linear{Matrix(1, 3), std::nullopt}}),
                 ValidationError);
    EXPECT_THROW(Pipeline({Identity{2}}, {Tap{"t", 3}}), ValidationError);
    EXPECT_THROW(Pipeline({Standardize{{0.0}, {0.0}}}), ValidationError);
    EXPECT_THROW(Pipeline({PcaProject{Matrix::from_rows({{1, 1}}), {0, 0}}}), ValidationError);
    const Pipeline p({Linear{Matrix::from_rows({{1e300, 1e300}}), std::nullopt}, Linear{Matrix::from_rows({{1e300}}), std::nullopt}});
    EXPECT_THROW(p.evaluate(Vector{1.0}), ValidationError);
    try {
        p.evaluate(Vector{1.0, 1.0});
        FAIL() << "expected a numeric error";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("module 1"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, TwoModuleLinearComposition) {
    const Matrix h = Matrix::from_rows({{1, 0, 2}, {0, 1, -1}});
    const Pipeline p = compose_two_module_linear(h, Vector{3.0, -2.0});
    const auto e = p.evaluate(Vector{1.0, 2.0, 3.0});
    EXPECT_EQ(e.taps[0].tap_id, "bottleneck");
    EXPECT_EQ(e.taps[0].value, (Vector{7.0, -1.0}));
    EXPECT_DOUBLE_EQ(e.output[0], 23.0);
    const auto aff = affine_map(p);
    ASSERT_TRUE(aff.has_value());
    EXPECT_EQ(aff->linear, Matrix::from_rows({{3, -2, 8}}));
}

TEST(Pipeline, AffineMapOnlyWithoutActivations) {
    RngStream rng(2, StreamId::kData);
    EXPECT_FALSE(affine_map(small_mlp(rng)).has_value());
    const Pipeline p({Standardize{{1.0, 2.0}, {2.0, 4.0}}, PcaProject{Matrix::from_rows({{0, 1}}), {0.5, 0.5}}});
    const auto aff = affine_map(p);
    ASSERT_TRUE(aff.has_value());
    const Vector x{3.0, -1.0};
    const Vector direct = p.evaluate(x).output;
    const Vector via = aff->linear * x + aff->offset;
    EXPECT_NEAR(direct[0], via[0], 1e-15);
}

TEST(Pipeline, TruncationKeepsPrefixAndTaps) {
    RngStream rng(3, StreamId::kData);
    const Pipeline p = small_mlp(rng);
    const Pipeline t = p.truncated(2);
    EXPECT_EQ(t.modules().size(), 3u);
    EXPECT_TRUE(t.has_tap("hidden"));
    EXPECT_FALSE(t.has_tap("bottleneck"));
    const Vector x{0.3, -0.2, 0.9};
    EXPECT_EQ(t.evaluate(x).output, p.evaluate(x).taps[0].value);
}

TEST(Serialization, PipelineRoundTripIsBitExact) {
    RngStream rng(4, StreamId::kData);
    const Pipeline p = small_mlp(rng);
    const Json j = pipeline_to_json(p);
    const Pipeline q = pipeline_from_json(Json::parse(j.dump()));
    ASSERT_EQ(q.modules().size(), p.modules().size());
    ASSERT_EQ(q.taps().size(), p.taps().size());
    EXPECT_EQ(pipeline_to_json(q).dump(), j.dump());
    for (int t = 0; t < 20; ++t) {
        const Vector x = gaussian(rng, 3);
        EXPECT_TRUE(bit_equal(p.evaluate(x).output, q.evaluate(x).output));
    }
}

TEST(Serialization, RejectsMalformedPipelines) {
    EXPECT_THROW(pipeline_from_json(Json::parse(R"({"modules": [{"kind": "conv"}], "taps": []})")),
                 ValidationError);
    EXPECT_THROW(pipeline_from_json(Json::parse(R"({"modules": [{"kind": "identity", "dim": 2}], "taps": [{"id": "t", "module": 4}]})")),
                 ValidationError);
    EXPECT_THROW(pipeline_from_json(Json::parse(
                     R"({"modules": [{"kind": "linear", "weights": [[1, 2], [3]]}], "taps": []})")),
                 ValidationError);
}
