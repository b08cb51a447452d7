#include <algorithm>
#include <cmath>

#include "quite/embed.hpp"
#include "quite/errors.hpp"
#include "quite/ops.hpp"

namespace quite::embed {

EmbeddingKind parse_embedding_kind(const std::string& name) {
    if (name == "quite") return EmbeddingKind::quite;
    if (name == "add") return EmbeddingKind::add;
    if (name == "concat") return EmbeddingKind::concat;
    if (name == "meanpool" || name == "mean_pooling") return EmbeddingKind::meanpool;
    if (name == "conventional") return EmbeddingKind::conventional;
    throw ValidationError("unknown embedding '" + name + "' (quite, add, concat, meanpool, conventional)");
}

std::string to_string(EmbeddingKind kind) {
    switch (kind) {
        case EmbeddingKind::quite: return "quite";
        case EmbeddingKind::add: return "add";
        case EmbeddingKind::concat: return "concat";
        case EmbeddingKind::meanpool: return "meanpool";
        case EmbeddingKind::conventional: return "conventional";
    }
    return "?";
}

SlotView slot_view(const data::PaddedBatch& batch) {
    if (batch.shape.size() != 3 && batch.shape.size() != 4) {
        throw DimensionError("padded batch must be [B, N, L] or [B, M, N, L], got " + shape_str(batch.shape));
    }
    SlotView view;
    view.leading.assign(batch.shape.begin(), batch.shape.end() - 1);
    view.slots = numel(view.leading);
    view.length = batch.shape.back();
    return view;
}

std::vector<double> slot_validity(const data::PaddedBatch& batch) {
    const SlotView view = slot_view(batch);
    std::vector<double> valid(view.slots, 0.0);
    for (std::size_t s = 0; s < view.slots; ++s)
        for (std::size_t i = 0; i < view.length; ++i)
            if (batch.masks[s * view.length + i] > 0.0) {
                valid[s] = 1.0;
                break;
            }
    return valid;
}

Tensor masked_mean(const Tensor& tokens, const std::vector<double>& masks) {
    const std::size_t T = tokens.dim(0), L = tokens.dim(1);
    if (masks.size() != T * L) {
        throw DimensionError("masked_mean: " + std::to_string(masks.size()) + " mask entries for tokens " +
                             shape_str(tokens.shape()));
    }
    std::vector<double> w(T * L, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double count = 0.0;
        for (std::size_t i = 0; i < L; ++i) count += masks[t * L + i];
        if (count == 0.0) continue;
        for (std::size_t i = 0; i < L; ++i) w[t * L + i] = masks[t * L + i] / count;
    }
    return ops::sum_axis(ops::mul(tokens, Tensor::from({T, L, 1}, std::move(w))), 1);
}

Tensor aggregate(const AttnBlock& block, const Tensor& queries, const Tensor& tokens, const Tensor& masks) {
    const std::size_t D = block.dim();
    const std::size_t T = queries.dim(0);
    if (queries.shape() != Shape{T, D} || tokens.rank() != 3 || tokens.dim(0) != T || tokens.dim(2) != D) {
        throw DimensionError("aggregate: queries " + shape_str(queries.shape()) + ", tokens " +
                             shape_str(tokens.shape()));
    }
    const std::size_t L = tokens.dim(1);
    if (masks.shape() != Shape{T, L}) {
        throw DimensionError("aggregate: masks " + shape_str(masks.shape()) + " for tokens " +
                             shape_str(tokens.shape()));
    }
    Tensor q = ops::reshape(queries, {T, 1, D});
    Tensor seq = L > 0 ? ops::concat({q, tokens}, 1) : q;
    std::vector<double> valid(T * (L + 1), 1.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < L; ++i) valid[t * (L + 1) + 1 + i] = masks.data()[t * L + i];
    Tensor h = block.self_attend(seq, Tensor::from({T, L + 1}, std::move(valid)), true);
    return ops::reshape(h, {T, D});
}

Tensor aggregate_variable(const Tensor& tokens, const Tensor& masks, const Tensor& query, const AttnBlock& block) {
    const std::size_t L = tokens.dim(0), D = block.dim();
    Tensor out = aggregate(block, ops::reshape(query, {1, D}), ops::reshape(tokens, {1, L, D}),
                           ops::reshape(masks, {1, L}));
    return ops::reshape(out, {D});
}

Tensor aggregate_patch(const Tensor& tokens, const Tensor& masks, const Tensor& queries, const AttnBlock& block) {
    if (tokens.rank() != 4) throw DimensionError("aggregate_patch expects Z[M, N, L, D], got " + shape_str(tokens.shape()));
    const std::size_t M = tokens.dim(0), N = tokens.dim(1), L = tokens.dim(2), D = block.dim();
    Tensor out = aggregate(block, ops::reshape(queries, {M * N, D}), ops::reshape(tokens, {M * N, L, D}),
                           ops::reshape(masks, {M * N, L}));
    return ops::reshape(out, {M, N, D});
}

namespace {

void check_layout(const EmbeddingLayout& layout, const data::PaddedBatch& batch) {
    if (batch.patched() != layout.patched()) {
        throw DimensionError(std::string("embedding expects a ") + (layout.patched() ? "patch" : "variable") +
                             "-level batch, got " + shape_str(batch.shape));
    }
    if (batch.num_variables() != layout.num_variables) {
        throw DimensionError("embedding built for " + std::to_string(layout.num_variables) +
                             " variables, batch has " + std::to_string(batch.num_variables()));
    }
    if (layout.patched() && batch.num_patches() != layout.num_patches) {
        throw DimensionError("embedding built for " + std::to_string(layout.num_patches) + " patches, batch has " +
                             std::to_string(batch.num_patches()));
    }
}

Shape with_dim(Shape leading, std::size_t D) {
    leading.push_back(D);
    return leading;
}

Shape query_shape(const EmbeddingLayout& layout) {
    if (layout.patched()) return {layout.num_patches, layout.num_variables, layout.dim};
    return {layout.num_variables, layout.dim};
}

}  // namespace

QuiteEmbedding::QuiteEmbedding(ParamStore& params, const std::string& prefix, const EmbeddingLayout& layout,
                               const TimeEmbedder& time)
    : layout_(layout),
      time_(time),
      value_(params, join_path(prefix, "value"), layout.dim),
      queries_(params.add(join_path(prefix, "queries"),
                          init_queries(layout.query_init, query_shape(layout), params.rng()()))),
      block_(params, join_path(prefix, "block"), layout.dim, layout.heads) {
    if (time.dim() != layout.dim) throw DimensionError("time embedding width differs from model width");
}

EmbeddingOutput QuiteEmbedding::forward(const data::PaddedBatch& batch) const {
    check_layout(layout_, batch);
    const SlotView view = slot_view(batch);
    const std::size_t D = layout_.dim, T = view.slots, L = view.length;
    const std::size_t per_instance = T / batch.batch();

    Tensor tokens = ops::reshape(tokenize(value_, time_, batch.values_tensor(), batch.times_tensor()), {T, L, D});
    std::vector<std::size_t> index(T);
    for (std::size_t t = 0; t < T; ++t) index[t] = t % per_instance;
    Tensor q = ops::index_select(ops::reshape(queries_, {per_instance, D}), 0, index);

    EmbeddingOutput out;
    out.embedding = ops::reshape(aggregate(block_, q, tokens, Tensor::from({T, L}, batch.masks)), with_dim(view.leading, D));
    out.slot_valid = slot_validity(batch);
    out.patched = batch.patched();
    return out;
}

BaselineEmbedding::BaselineEmbedding(ParamStore& params, const std::string& prefix, EmbeddingKind kind,
                                     const EmbeddingLayout& layout, const TimeEmbedder& time)
    : kind_(kind), layout_(layout), time_(time), value_(params, join_path(prefix, "value"), layout.dim) {
    if (time.dim() != layout.dim) throw DimensionError("time embedding width differs from model width");
    switch (kind) {
        case EmbeddingKind::add: break;
        case EmbeddingKind::concat:
            concat_weight_ = params.add(join_path(prefix, "concat.weight"), xavier_weight(2, layout.dim, params.rng()));
            concat_bias_ = params.add(join_path(prefix, "concat.bias"), Tensor::zeros({layout.dim}));
            break;
        case EmbeddingKind::meanpool:
            block_ = std::make_unique<AttnBlock>(params, join_path(prefix, "block"), layout.dim, layout.heads);
            break;
        default: throw ValidationError("baseline embedding cannot be '" + to_string(kind) + "'");
    }
}

EmbeddingOutput BaselineEmbedding::forward(const data::PaddedBatch& batch) const {
    check_layout(layout_, batch);
    const SlotView view = slot_view(batch);
    const std::size_t D = layout_.dim, T = view.slots, L = view.length;

    EmbeddingOutput out;
    out.slot_valid = slot_validity(batch);
    out.patched = batch.patched();
    if (L == 0) {
        out.embedding = Tensor::zeros(with_dim(view.leading, D));
        return out;
    }

    Tensor pooled;
    if (kind_ == EmbeddingKind::concat) {
        Shape s = batch.shape;
        s.push_back(1);
        Tensor pairs = ops::concat({Tensor::from(s, batch.values), Tensor::from(s, batch.times)}, -1);
        Tensor tokens = ops::reshape(ops::linear(pairs, concat_weight_, concat_bias_), {T, L, D});
        pooled = masked_mean(tokens, batch.masks);
    } else {
        Tensor tokens = ops::reshape(tokenize(value_, time_, batch.values_tensor(), batch.times_tensor()), {T, L, D});
        if (kind_ == EmbeddingKind::meanpool) {
            // Empty slots attend over their padding; the result is discarded
            // by the masked mean but keeps every softmax row well defined.
            std::vector<double> keys = batch.masks;
            for (std::size_t t = 0; t < T; ++t)
                if (out.slot_valid[t] == 0.0) std::fill_n(keys.begin() + static_cast<std::ptrdiff_t>(t * L), L, 1.0);
            tokens = block_->self_attend(tokens, Tensor::from({T, L}, std::move(keys)));
        }
        pooled = masked_mean(tokens, batch.masks);
    }
    out.embedding = ops::reshape(pooled, with_dim(view.leading, D));
    return out;
}

ConventionalEmbedding::ConventionalEmbedding(ParamStore& params, const std::string& prefix,
                                             const EmbeddingLayout& layout)
    : layout_(layout) {
    if (layout.grid_width == 0) throw ValidationError("conventional embedding needs a positive grid width");
    if (!(layout.grid_region > 0.0)) throw ValidationError("conventional embedding needs a positive grid region");
    weight_ = params.add(join_path(prefix, "weight"), xavier_weight(layout.grid_width, layout.dim, params.rng()));
    bias_ = params.add(join_path(prefix, "bias"), Tensor::zeros({layout.dim}));
}

Tensor ConventionalEmbedding::grid(const data::PaddedBatch& batch) const {
    check_layout(layout_, batch);
    const SlotView view = slot_view(batch);
    const std::size_t K = layout_.grid_width, N = layout_.num_variables;
    const std::size_t M = layout_.patched() ? layout_.num_patches : 1;
    std::vector<double> cells(view.slots * K, 0.0), hits(view.slots * K, 0.0);
    for (std::size_t s = 0; s < view.slots; ++s) {
        const std::size_t m = (s / N) % M;
        const double start = layout_.grid_origin + static_cast<double>(m) * layout_.grid_region;
        for (std::size_t i = 0; i < view.length; ++i) {
            const std::size_t at = s * view.length + i;
            if (batch.masks[at] == 0.0) continue;
            const double pos = std::floor((batch.times[at] - start) / layout_.grid_region * static_cast<double>(K));
            const auto k = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(K - 1)));
            cells[s * K + k] += batch.values[at];
            hits[s * K + k] += 1.0;
        }
    }
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (hits[c] > 0.0) cells[c] /= hits[c];
    return Tensor::from({view.slots, K}, std::move(cells));
}

EmbeddingOutput ConventionalEmbedding::forward(const data::PaddedBatch& batch) const {
    Tensor g = grid(batch);
    const SlotView view = slot_view(batch);
    EmbeddingOutput out;
    out.embedding = ops::reshape(ops::linear(g, weight_, bias_), with_dim(view.leading, layout_.dim));
    out.slot_valid = slot_validity(batch);
    out.patched = batch.patched();
    return out;
}

std::unique_ptr<Embedding> make_embedding(ParamStore& params, const std::string& prefix, EmbeddingKind kind,
                                          const EmbeddingLayout& layout, const TimeEmbedder& time) {
    switch (kind) {
        case EmbeddingKind::quite: return std::make_unique<QuiteEmbedding>(params, prefix, layout, time);
        case EmbeddingKind::conventional: return std::make_unique<ConventionalEmbedding>(params, prefix, layout);
        default: return std::make_unique<BaselineEmbedding>(params, prefix, kind, layout, time);
    }
}

}  // namespace quite::embed
