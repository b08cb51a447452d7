#include "quite/backbones.hpp"

#include "quite/errors.hpp"
#include "quite/ops.hpp"

namespace quite::model {

BackboneFamily parse_backbone_family(const std::string& name) {
    if (name == "patch_transformer" || name == "patch") return BackboneFamily::patch_transformer;
    if (name == "variate_transformer" || name == "variate") return BackboneFamily::variate_transformer;
    throw ValidationError("unknown backbone '" + name + "' (patch_transformer, variate_transformer)");
}

std::string to_string(BackboneFamily family) {
    return family == BackboneFamily::patch_transformer ? "patch_transformer" : "variate_transformer";
}

namespace {

std::vector<std::unique_ptr<embed::AttnBlock>> make_blocks(ParamStore& params, const std::string& prefix,
                                                           std::size_t dim, std::size_t heads, std::size_t depth) {
    if (depth > kMaxBackboneDepth) {
        throw ValidationError("backbone depth " + std::to_string(depth) + " exceeds " +
                              std::to_string(kMaxBackboneDepth));
    }
    std::vector<std::unique_ptr<embed::AttnBlock>> blocks;
    for (std::size_t l = 0; l < depth; ++l) {
        blocks.push_back(
            std::make_unique<embed::AttnBlock>(params, join_path(prefix, "layer" + std::to_string(l)), dim, heads));
    }
    return blocks;
}

}  // namespace

PatchTransformer::PatchTransformer(ParamStore& params, const std::string& prefix, std::size_t dim,
                                   std::size_t heads, std::size_t depth)
    : dim_(dim), blocks_(make_blocks(params, prefix, dim, heads, depth)) {}

Encoded PatchTransformer::encode(const embed::EmbeddingOutput& input) const {
    const Shape& s = input.embedding.shape();
    if (!input.patched || s.size() != 4 || s[3] != dim_) {
        throw DimensionError("patch backbone expects [B, M, N, " + std::to_string(dim_) + "], got " + shape_str(s));
    }
    const std::size_t B = s[0], M = s[1], N = s[2], D = dim_;
    // Per-variable view [B*N, M]; variables with no observation at all keep
    // every patch as a key so softmax rows stay defined.
    std::vector<double> valid(B * N * M, 0.0), keys(B * N * M, 1.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < N; ++n) {
            bool any = false;
            for (std::size_t m = 0; m < M; ++m) {
                const double v = input.slot_valid[(b * M + m) * N + n];
                valid[(b * N + n) * M + m] = v;
                any = any || v > 0.0;
            }
            if (any)
                for (std::size_t m = 0; m < M; ++m) keys[(b * N + n) * M + m] = valid[(b * N + n) * M + m];
        }
    Tensor h = ops::reshape(ops::permute(input.embedding, {0, 2, 1, 3}), {B * N, M, D});
    Tensor key_mask = Tensor::from({B * N, M}, keys);
    for (const auto& block : blocks_) h = block->self_attend(h, key_mask);

    Encoded out;
    out.summary = ops::reshape(embed::masked_mean(h, valid), {B, N, D});
    out.patches = ops::permute(ops::reshape(h, {B, N, M, D}), {0, 2, 1, 3});
    return out;
}

VariateTransformer::VariateTransformer(ParamStore& params, const std::string& prefix, std::size_t dim,
                                       std::size_t heads, std::size_t depth)
    : dim_(dim), blocks_(make_blocks(params, prefix, dim, heads, depth)) {}

Encoded VariateTransformer::encode(const embed::EmbeddingOutput& input) const {
    const Shape& s = input.embedding.shape();
    if (input.patched || s.size() != 3 || s[2] != dim_) {
        throw DimensionError("variate backbone expects [B, N, " + std::to_string(dim_) + "], got " + shape_str(s));
    }
    const std::size_t B = s[0], N = s[1], D = dim_;
    Tensor h = input.embedding;
    for (const auto& block : blocks_) h = block->self_attend(h, {});
    Encoded out;
    out.summary = h;
    out.patches = ops::reshape(h, {B, 1, N, D});
    return out;
}

std::unique_ptr<Encoder> make_backbone(ParamStore& params, const std::string& prefix, BackboneFamily family,
                                       std::size_t dim, std::size_t heads, std::size_t depth) {
    if (family == BackboneFamily::patch_transformer) {
        return std::make_unique<PatchTransformer>(params, prefix, dim, heads, depth);
    }
    return std::make_unique<VariateTransformer>(params, prefix, dim, heads, depth);
}

}  // namespace quite::model
