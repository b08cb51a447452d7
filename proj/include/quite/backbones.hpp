#pragma once

#include <memory>
#include <string>
#include <vector>

#include "quite/quitepp.hpp"

namespace quite::model {

enum class BackboneFamily { patch_transformer, variate_transformer };

BackboneFamily parse_backbone_family(const std::string& name);
std::string to_string(BackboneFamily family);

/// Channel-independent transformer over the M patch tokens of each variable.
/// C is the masked mean over patches holding observations; E is the block
/// output. Depth 0 passes E through.
class PatchTransformer : public Encoder {
public:
    PatchTransformer(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                     std::size_t depth);
    Encoded encode(const embed::EmbeddingOutput& input) const override;

private:
    std::size_t dim_;
    std::vector<std::unique_ptr<embed::AttnBlock>> blocks_;
};

/// Transformer over N variate tokens; E is C viewed as a single patch.
class VariateTransformer : public Encoder {
public:
    VariateTransformer(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                       std::size_t depth);
    Encoded encode(const embed::EmbeddingOutput& input) const override;

private:
    std::size_t dim_;
    std::vector<std::unique_ptr<embed::AttnBlock>> blocks_;
};

inline constexpr std::size_t kMaxBackboneDepth = 2;

std::unique_ptr<Encoder> make_backbone(ParamStore& params, const std::string& prefix, BackboneFamily family,
                                       std::size_t dim, std::size_t heads, std::size_t depth);

}  // namespace quite::model
