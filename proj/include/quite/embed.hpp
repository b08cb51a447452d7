#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "quite/imts.hpp"
#include "quite/param_store.hpp"
#include "quite/tensor.hpp"

namespace quite::embed {

enum class QueryInit { random_normal, xavier, uniform, zero };

QueryInit parse_query_init(const std::string& name);
std::string to_string(QueryInit init);

/// Query-token initializers: random_normal N(0, 0.02^2), xavier
/// U(+-sqrt(6 / (fan_in + fan_out))) with fan_in = last extent and fan_out =
/// the remaining extents, uniform U(-0.1, 0.1), zero. Deterministic in seed.
Tensor init_queries(QueryInit scheme, const Shape& shape, std::uint64_t seed);

/// Glorot-uniform weight of shape [fan_in, fan_out].
Tensor xavier_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// phi(t)[0] = w_0 t + a_0,  phi(t)[k] = sin(w_k t + a_k) for k > 0.
class TimeEmbedder {
public:
    TimeEmbedder(ParamStore& params, const std::string& prefix, std::size_t dim);

    /// t[...] -> [..., D]
    Tensor operator()(const Tensor& t) const;
    std::size_t dim() const { return dim_; }

    Tensor frequency;
    Tensor phase;

private:
    std::size_t dim_;
};

/// f_val: R -> R^D, a single affine map.
class ValueEmbedder {
public:
    ValueEmbedder(ParamStore& params, const std::string& prefix, std::size_t dim);
    Tensor operator()(const Tensor& x) const;  // x[...] -> [..., D]

    Tensor weight;  // [1, D]
    Tensor bias;    // [D]
};

/// z = f_val(x) + phi(t) for every padded slot; masks are untouched.
Tensor tokenize(const ValueEmbedder& value, const TimeEmbedder& time, const Tensor& values, const Tensor& times);

/// Pre-norm transformer block: LN -> multi-head attention -> residual ->
/// LN -> FFN(D -> 4D -> D, ReLU) -> residual. In cross mode the key/value
/// stream gets its own LayerNorm.
class AttnBlock {
public:
    AttnBlock(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
              bool cross = false);

    /// x[T, S, D], key_mask[T, S] (undefined = all valid). When
    /// `first_only`, only position 0 is updated and returned as [T, 1, D].
    Tensor self_attend(const Tensor& x, const Tensor& key_mask, bool first_only = false) const;

    /// queries[T, P, D] attend to context[T, K, D]; returns [T, P, D].
    Tensor cross_attend(const Tensor& queries, const Tensor& context, const Tensor& key_mask = {}) const;

    /// Attention weights of the last cross_attend/self_attend call are not
    /// kept; this recomputes them for inspection: [T, heads, P, K].
    Tensor attention_weights(const Tensor& queries, const Tensor& context) const;

    std::size_t dim() const { return dim_; }
    std::size_t heads() const { return heads_; }
    bool cross() const { return cross_; }

private:
    Tensor attend(const Tensor& q_in, const Tensor& kv_in, const Tensor& key_mask, Tensor* weights) const;
    Tensor feed_forward(const Tensor& x) const;

    std::size_t dim_;
    std::size_t heads_;
    bool cross_;
    Tensor ln1_gain_, ln1_bias_, lnkv_gain_, lnkv_bias_, ln2_gain_, ln2_bias_;
    Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor ff1_w_, ff1_b_, ff2_w_, ff2_b_;
};

/// Query-based set aggregation over T independent slots: each slot's
/// sequence is [q ; Z] with key validity [1 | m]; returns H[0] per slot.
/// queries[T, D], tokens[T, L, D], masks[T, L] -> [T, D].
Tensor aggregate(const AttnBlock& block, const Tensor& queries, const Tensor& tokens, const Tensor& masks);

/// Single-variable convenience: Z_n[L, D], m_n[L], q_n[D] -> e_n[D].
Tensor aggregate_variable(const Tensor& tokens, const Tensor& masks, const Tensor& query, const AttnBlock& block);
/// Z[M, N, L, D], m[M, N, L], q[M, N, D] -> E^patch[M, N, D].
Tensor aggregate_patch(const Tensor& tokens, const Tensor& masks, const Tensor& queries, const AttnBlock& block);

enum class EmbeddingKind { quite, add, concat, meanpool, conventional };

EmbeddingKind parse_embedding_kind(const std::string& name);
std::string to_string(EmbeddingKind kind);

/// Structured embedding of a batch: [B, N, D] (variable level) or
/// [B, M, N, D] (patch level). `slot_valid` flags slots holding at least one
/// real observation, laid out [B, N] or [B, M, N].
struct EmbeddingOutput {
    Tensor embedding;
    std::vector<double> slot_valid;
    bool patched = false;
};

/// Shape information every embedding needs at construction.
struct EmbeddingLayout {
    std::size_t num_variables = 1;
    std::size_t num_patches = 0;  // 0 selects variable-level output
    std::size_t dim = 64;
    std::size_t heads = 4;
    QueryInit query_init = QueryInit::random_normal;
    // Fixed input grid for the conventional embedding: each slot region
    // (one patch, or the whole history) spans `grid_region` rescaled time
    // units starting at `grid_origin` and is rebinned into `grid_width` cells.
    std::size_t grid_width = 8;
    double grid_origin = 0.0;
    double grid_region = 1.0;

    bool patched() const { return num_patches > 0; }
};

class Embedding {
public:
    virtual ~Embedding() = default;
    virtual EmbeddingOutput forward(const data::PaddedBatch& batch) const = 0;
    virtual EmbeddingKind kind() const = 0;
};

/// Learnable query tokens, one per variable or per (patch, variable).
class QuiteEmbedding : public Embedding {
public:
    QuiteEmbedding(ParamStore& params, const std::string& prefix, const EmbeddingLayout& layout,
                   const TimeEmbedder& time);
    EmbeddingOutput forward(const data::PaddedBatch& batch) const override;
    EmbeddingKind kind() const override { return EmbeddingKind::quite; }

    const Tensor& queries() const { return queries_; }  // [N, D] or [M, N, D]
    const AttnBlock& block() const { return block_; }
    const ValueEmbedder& value_embedder() const { return value_; }

private:
    EmbeddingLayout layout_;
    const TimeEmbedder& time_;
    ValueEmbedder value_;
    Tensor queries_;
    AttnBlock block_;
};

/// Add, Concat and Mean-Pooling baselines.
class BaselineEmbedding : public Embedding {
public:
    BaselineEmbedding(ParamStore& params, const std::string& prefix, EmbeddingKind kind,
                      const EmbeddingLayout& layout, const TimeEmbedder& time);
    EmbeddingOutput forward(const data::PaddedBatch& batch) const override;
    EmbeddingKind kind() const override { return kind_; }

private:
    EmbeddingKind kind_;
    EmbeddingLayout layout_;
    const TimeEmbedder& time_;
    ValueEmbedder value_;
    Tensor concat_weight_, concat_bias_;
    std::unique_ptr<AttnBlock> block_;
};

/// Per-observation linear embedding on a padded grid: values are rebinned by
/// timestamp into grid_width cells (collisions averaged, empty cells zero) and
/// projected with one linear map grid_width -> D.
class ConventionalEmbedding : public Embedding {
public:
    ConventionalEmbedding(ParamStore& params, const std::string& prefix, const EmbeddingLayout& layout);
    EmbeddingOutput forward(const data::PaddedBatch& batch) const override;
    EmbeddingKind kind() const override { return EmbeddingKind::conventional; }

    /// Rebinned grid [T, grid_width] without gradient.
    Tensor grid(const data::PaddedBatch& batch) const;

private:
    EmbeddingLayout layout_;
    Tensor weight_, bias_;
};

/// Builds the embedding selected by `kind`.
std::unique_ptr<Embedding> make_embedding(ParamStore& params, const std::string& prefix, EmbeddingKind kind,
                                          const EmbeddingLayout& layout, const TimeEmbedder& time);

/// Mean over axis 1 of tokens[T, L, D] restricted to masks[T, L]; all-masked
/// slots give the zero vector.
Tensor masked_mean(const Tensor& tokens, const std::vector<double>& masks);

/// Reshapes a padded batch into T = B*N (or B*M*N) slots of L observations.
struct SlotView {
    std::size_t slots = 0;
    std::size_t length = 0;
    Shape leading;  // [B, N] or [B, M, N]
};
SlotView slot_view(const data::PaddedBatch& batch);
std::vector<double> slot_validity(const data::PaddedBatch& batch);

}  // namespace quite::embed
