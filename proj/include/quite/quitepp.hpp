#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "quite/embed.hpp"

namespace quite::model {

/// Encoder outputs for a batch: variable summaries C[B, N, D] and patch
/// tokens E[B, M, N, D] (M = 1 for encoders without a patch axis).
struct Encoded {
    Tensor summary;
    Tensor patches;
};

/// Anything that turns a structured embedding into (C, E).
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual Encoded encode(const embed::EmbeddingOutput& input) const = 0;
};

/// Hierarchical patch/variable encoder. Each layer runs a patch-level block
/// over [c_n ; e_1n .. e_Mn] for every variable, then a variable-level block
/// over [c_1 .. c_N].
class HierarchicalEncoder : public Encoder {
public:
    HierarchicalEncoder(ParamStore& params, const std::string& prefix, std::size_t num_variables,
                        std::size_t num_patches, std::size_t dim, std::size_t heads, std::size_t layers);

    Encoded encode(const embed::EmbeddingOutput& input) const override;
    /// E^patch[B, M, N, D] -> (C, E).
    Encoded encode(const Tensor& patch_embedding) const;

    const Tensor& variable_tokens() const { return variable_tokens_; }  // [N, D]
    std::size_t layers() const { return patch_blocks_.size(); }

private:
    std::size_t num_variables_, num_patches_, dim_;
    Tensor variable_tokens_;
    std::vector<std::unique_ptr<embed::AttnBlock>> patch_blocks_;
    std::vector<std::unique_ptr<embed::AttnBlock>> variable_blocks_;
};

/// Row-wise gather used by the decoder: query j of instance b reads variable
/// n_j of that instance.
struct QueryIndex {
    std::size_t batch = 0;
    std::size_t per_instance = 0;
    std::vector<std::size_t> variable;  // [batch * per_instance]
};

/// Cross-attention forecasting head. The global path attends to C_n (a
/// single key), the local path to the M patch tokens of variable n, and f_out
/// maps [G ; R] (width 2D) through D -> D -> 1.
class ForecastDecoder {
public:
    ForecastDecoder(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                    const embed::TimeEmbedder& time);

    /// tau[...] -> U[..., D] through the shared time embedding.
    Tensor embed_future_queries(const Tensor& tau) const;
    /// U[T, P, D] against C_n[T, 1, D] -> G[T, P, D].
    Tensor decode_global(const Tensor& queries, const Tensor& summary) const;
    /// U[T, P, D] against E_n[T, M, D] -> R[T, P, D].
    Tensor decode_local(const Tensor& queries, const Tensor& patches) const;
    /// [G ; R] -> y[T, P].
    Tensor predict(const Tensor& global, const Tensor& local) const;

    /// Predictions for padded query lists: tau[B * P] rescaled times -> [B, P].
    Tensor forward(const Encoded& encoded, const QueryIndex& index, std::span<const double> tau) const;
    /// Full grid: every tau_j for every variable -> Y[B, L_pred, N].
    Tensor forward_grid(const Encoded& encoded, const Tensor& tau) const;

    std::size_t output_input_width() const { return out1_w_.dim(0); }
    const embed::AttnBlock& global_block() const { return global_; }
    const embed::AttnBlock& local_block() const { return local_; }

private:
    std::size_t dim_;
    const embed::TimeEmbedder& time_;
    embed::AttnBlock global_;
    embed::AttnBlock local_;
    Tensor out1_w_, out1_b_, out2_w_, out2_b_, out3_w_, out3_b_;
};

/// Flattens C[B, N, D] and maps it through a 3-layer MLP to class logits.
class ClassifierHead {
public:
    ClassifierHead(ParamStore& params, const std::string& prefix, std::size_t num_variables, std::size_t dim,
                   std::size_t num_classes);
    Tensor forward(const Encoded& encoded) const;  // [B, classes]
    std::size_t num_classes() const { return num_classes_; }

private:
    std::size_t num_variables_, dim_, num_classes_;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace quite::model
