#include <gtest/gtest.h>

#include "quite/errors.hpp"
#include "quite/model.hpp"
#include "test_support.hpp"

using namespace quite;
using namespace quite::model;
using quite::test::max_abs_diff;
using quite::test::random_history;
using quite::test::random_tensor;

namespace {

const data::TimeWindow kScale{0.0, 48.0};

ModelConfig backbone_config(Architecture arch, embed::EmbeddingKind kind, std::size_t depth = 2) {
    ModelConfig c;
    c.architecture = arch;
    c.embedding = kind;
    c.num_variables = 3;
    c.num_patches = 4;
    c.dim = 8;
    c.heads = 2;
    c.layers = depth;
    c.grid_width = 6;
    c.grid_region = arch == Architecture::variate_transformer ? 0.5 : 0.125;
    return c;
}

data::PaddedBatch pad(const std::vector<data::ImtsInstance>& instances, bool patched) {
    std::vector<const data::ImtsInstance*> ptrs;
    for (const auto& i : instances) ptrs.push_back(&i);
    if (!patched) return data::batch_pad(ptrs, kScale);
    return data::batch_pad(ptrs, data::PatchSpec{6.0, 6.0, {0.0, 24.0}}, kScale);
}

embed::EmbeddingOutput patch_input(const Tensor& e) {
    embed::EmbeddingOutput in;
    in.embedding = e;
    in.patched = true;
    in.slot_valid.assign(e.dim(0) * e.dim(1) * e.dim(2), 1.0);
    return in;
}

}  // namespace

TEST(Backbones, DepthZeroPassesThrough) {
    ParamStore params(1);
    PatchTransformer patch(params, "p", 8, 2, 0);
    VariateTransformer variate(params, "v", 8, 2, 0);
    EXPECT_EQ(params.size(), 0u);
    std::mt19937_64 rng(1);
    Tensor e = random_tensor({2, 4, 3, 8}, rng);
    Encoded p = patch.encode(patch_input(e));
    EXPECT_EQ(max_abs_diff(p.patches, e), 0.0);

    embed::EmbeddingOutput flat;
    flat.embedding = random_tensor({2, 3, 8}, rng);
    Encoded v = variate.encode(flat);
    EXPECT_EQ(max_abs_diff(v.summary, flat.embedding), 0.0);
    EXPECT_EQ(v.patches.shape(), (Shape{2, 1, 3, 8}));
}

TEST(Backbones, PatchSummaryAveragesObservedPatches) {
    ParamStore params(2);
    PatchTransformer patch(params, "p", 4, 1, 0);
    Tensor e = Tensor::from({1, 2, 1, 4}, {1, 2, 3, 4, 10, 20, 30, 40});
    auto in = patch_input(e);
    in.slot_valid = {1.0, 0.0};
    Encoded out = patch.encode(in);
    for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(out.summary.at({0, 0, d}), static_cast<double>(d + 1));
}

TEST(Backbones, VariateSingleTokenIsDeterministic) {
    ParamStore params(3);
    VariateTransformer variate(params, "v", 4, 2, 1);
    std::mt19937_64 rng(3);
    embed::EmbeddingOutput in;
    in.embedding = random_tensor({2, 1, 4}, rng);
    Encoded a = variate.encode(in), b = variate.encode(in);
    EXPECT_EQ(max_abs_diff(a.summary, b.summary), 0.0);
    embed::EmbeddingOutput first;
    first.embedding = ops::slice(in.embedding, 0, 0, 1);
    Encoded c = variate.encode(first);
    for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(c.summary.at({0, 0, d}), a.summary.at({0, 0, d}), 1e-12);
}

TEST(Backbones, StructureMismatchThrows) {
    ParamStore params(4);
    PatchTransformer patch(params, "p", 8, 2, 1);
    VariateTransformer variate(params, "v", 8, 2, 1);
    embed::EmbeddingOutput flat;
    flat.embedding = Tensor::zeros({1, 3, 8});
    EXPECT_THROW(patch.encode(flat), DimensionError);
    EXPECT_THROW(variate.encode(patch_input(Tensor::zeros({1, 2, 3, 8}))), DimensionError);
    EXPECT_THROW(PatchTransformer(params, "deep", 8, 2, 3), ValidationError);
}

TEST(Backbones, PatchFamilyIsChannelIndependent) {
    ParamStore params(5);
    PatchTransformer patch(params, "p", 8, 2, 2);
    std::mt19937_64 rng(5);
    Tensor e = random_tensor({1, 4, 3, 8}, rng);
    const std::vector<std::size_t> perm{1, 2, 0};
    Tensor permuted = ops::index_select(e, 2, perm);
    Encoded a = patch.encode(patch_input(e)), b = patch.encode(patch_input(permuted));
    EXPECT_LT(max_abs_diff(b.summary, ops::index_select(a.summary, 1, perm)), 1e-12);
    EXPECT_LT(max_abs_diff(b.patches, ops::index_select(a.patches, 2, perm)), 1e-12);
}

TEST(Backbones, ManifestIdenticalAcrossEmbeddings) {
    using embed::EmbeddingKind;
    for (auto arch : {Architecture::patch_transformer, Architecture::variate_transformer, Architecture::quitepp}) {
        const auto reference = Forecaster(backbone_config(arch, EmbeddingKind::conventional)).backbone_manifest();
        EXPECT_FALSE(reference.empty());
        for (auto kind : {EmbeddingKind::add, EmbeddingKind::concat, EmbeddingKind::meanpool, EmbeddingKind::quite}) {
            Forecaster model(backbone_config(arch, kind));
            EXPECT_EQ(model.backbone_manifest(), reference) << to_string(arch) << " / " << embed::to_string(kind);
        }
    }
}

TEST(Backbones, BackboneInitDoesNotDependOnEmbedding) {
    Forecaster a(backbone_config(Architecture::patch_transformer, embed::EmbeddingKind::conventional));
    Forecaster b(backbone_config(Architecture::patch_transformer, embed::EmbeddingKind::quite));
    for (const auto& [name, shape] : a.backbone_manifest()) {
        EXPECT_EQ(max_abs_diff(a.params().get(name), b.params().get(name)), 0.0) << name;
    }
}

TEST(Backbones, EndToEndForecastShapes) {
    using embed::EmbeddingKind;
    std::mt19937_64 rng(6);
    std::vector<data::ImtsInstance> batch{random_history(rng, 3, 5, 24.0), random_history(rng, 3, 5, 24.0)};
    Tensor tau = Tensor::from({2, 2}, {0.6, 0.7, 0.8, 0.9});
    for (auto arch : {Architecture::patch_transformer, Architecture::variate_transformer}) {
        for (auto kind : {EmbeddingKind::conventional, EmbeddingKind::add, EmbeddingKind::concat,
                          EmbeddingKind::meanpool, EmbeddingKind::quite}) {
            Forecaster model(backbone_config(arch, kind));
            auto padded = pad(batch, arch == Architecture::patch_transformer);
            EXPECT_EQ(model.forecast_grid(padded, tau).shape(), (Shape{2, 2, 3}))
                << to_string(arch) << " / " << embed::to_string(kind);
        }
    }
}

TEST(Conventional, ParameterCountMatchesLinearCost) {
    for (std::size_t width : {3u, 6u, 10u}) {
        ModelConfig cfg = backbone_config(Architecture::variate_transformer, embed::EmbeddingKind::conventional, 0);
        cfg.grid_width = width;
        Forecaster model(cfg);
        std::size_t embed_params = 0;
        for (const auto& [name, t] : model.params())
            if (name.rfind("embed.", 0) == 0) embed_params += t.size();
        EXPECT_EQ(embed_params, width * cfg.dim + cfg.dim);
    }
}
