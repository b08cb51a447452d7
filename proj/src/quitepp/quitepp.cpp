#include "quite/quitepp.hpp"

#include <algorithm>
#include <map>

#include "quite/errors.hpp"
#include "quite/ops.hpp"

namespace quite::model {

using embed::AttnBlock;
using embed::xavier_weight;

HierarchicalEncoder::HierarchicalEncoder(ParamStore& params, const std::string& prefix, std::size_t num_variables,
                                         std::size_t num_patches, std::size_t dim, std::size_t heads,
                                         std::size_t layers)
    : num_variables_(num_variables), num_patches_(num_patches), dim_(dim) {
    if (layers == 0) throw ValidationError("hierarchical encoder needs at least one layer");
    if (num_variables == 0 || num_patches == 0) throw ValidationError("hierarchical encoder needs N, M > 0");
    variable_tokens_ = params.add(join_path(prefix, "variable_tokens"),
                                  embed::init_queries(embed::QueryInit::random_normal, {num_variables, dim},
                                                      params.rng()()));
    for (std::size_t l = 0; l < layers; ++l) {
        const std::string layer = join_path(prefix, "layer" + std::to_string(l));
        patch_blocks_.push_back(std::make_unique<AttnBlock>(params, join_path(layer, "patch"), dim, heads));
        variable_blocks_.push_back(std::make_unique<AttnBlock>(params, join_path(layer, "variable"), dim, heads));
    }
}

Encoded HierarchicalEncoder::encode(const embed::EmbeddingOutput& input) const {
    if (!input.patched) throw DimensionError("hierarchical encoder needs a patch-level embedding");
    return encode(input.embedding);
}

Encoded HierarchicalEncoder::encode(const Tensor& patch_embedding) const {
    const Shape& s = patch_embedding.shape();
    if (s.size() != 4 || s[1] != num_patches_ || s[2] != num_variables_ || s[3] != dim_) {
        throw DimensionError("hierarchical encoder expects [B, " + std::to_string(num_patches_) + ", " +
                             std::to_string(num_variables_) + ", " + std::to_string(dim_) + "], got " +
                             shape_str(s));
    }
    const std::size_t B = s[0], M = num_patches_, N = num_variables_, D = dim_;
    std::vector<std::size_t> identity(B * N);
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i % N;

    Tensor c = ops::reshape(ops::index_select(variable_tokens_, 0, identity), {B * N, 1, D});
    Tensor e = ops::reshape(ops::permute(patch_embedding, {0, 2, 1, 3}), {B * N, M, D});
    for (std::size_t l = 0; l < patch_blocks_.size(); ++l) {
        Tensor seq = patch_blocks_[l]->self_attend(ops::concat({c, e}, 1), {});
        e = ops::slice(seq, 1, 1, M);
        Tensor vars = ops::reshape(ops::slice(seq, 1, 0, 1), {B, N, D});
        c = ops::reshape(variable_blocks_[l]->self_attend(vars, {}), {B * N, 1, D});
    }
    Encoded out;
    out.summary = ops::reshape(c, {B, N, D});
    out.patches = ops::permute(ops::reshape(e, {B, N, M, D}), {0, 2, 1, 3});
    return out;
}

ForecastDecoder::ForecastDecoder(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads,
                                 const embed::TimeEmbedder& time)
    : dim_(dim),
      time_(time),
      global_(params, join_path(prefix, "global"), dim, heads, true),
      local_(params, join_path(prefix, "local"), dim, heads, true) {
    if (time.dim() != dim) {
        throw DimensionError("decoder width " + std::to_string(dim) + " differs from time embedding width " +
                             std::to_string(time.dim()));
    }
    auto& rng = params.rng();
    out1_w_ = params.add(join_path(prefix, "out.w1"), xavier_weight(2 * dim, dim, rng));
    out1_b_ = params.add(join_path(prefix, "out.b1"), Tensor::zeros({dim}));
    out2_w_ = params.add(join_path(prefix, "out.w2"), xavier_weight(dim, dim, rng));
    out2_b_ = params.add(join_path(prefix, "out.b2"), Tensor::zeros({dim}));
    out3_w_ = params.add(join_path(prefix, "out.w3"), xavier_weight(dim, 1, rng));
    out3_b_ = params.add(join_path(prefix, "out.b3"), Tensor::zeros({1}));
}

Tensor ForecastDecoder::embed_future_queries(const Tensor& tau) const { return time_(tau); }

Tensor ForecastDecoder::decode_global(const Tensor& queries, const Tensor& summary) const {
    return global_.cross_attend(queries, summary);
}

Tensor ForecastDecoder::decode_local(const Tensor& queries, const Tensor& patches) const {
    return local_.cross_attend(queries, patches);
}

Tensor ForecastDecoder::predict(const Tensor& global, const Tensor& local) const {
    if (global.shape() != local.shape()) {
        throw DimensionError("predict: global " + shape_str(global.shape()) + " vs local " + shape_str(local.shape()));
    }
    Tensor h = ops::concat({global, local}, -1);
    h = ops::relu(ops::linear(h, out1_w_, out1_b_));
    h = ops::relu(ops::linear(h, out2_w_, out2_b_));
    Tensor y = ops::linear(h, out3_w_, out3_b_);
    Shape s = y.shape();
    s.pop_back();
    return ops::reshape(y, s);
}

Tensor ForecastDecoder::forward(const Encoded& encoded, const QueryIndex& index, std::span<const double> tau) const {
    const std::size_t B = encoded.summary.dim(0), N = encoded.summary.dim(1);
    const std::size_t M = encoded.patches.dim(1), D = dim_;
    const std::size_t T = index.batch * index.per_instance;
    if (index.batch != B || index.variable.size() != T || tau.size() != T) {
        throw DimensionError("decoder: query index does not match batch of " + std::to_string(B));
    }
    if (T == 0) throw ValidationError("decoder: no queries");
    // Group queries by (instance, variable) so each context is projected once.
    const std::size_t G = B * N;
    // Repeated (group, tau) pairs, such as padding, share one slot.
    std::vector<std::size_t> group(T), slot(T), fill(G, 0);
    std::map<std::pair<std::size_t, double>, std::size_t> seen;
    for (std::size_t t = 0; t < T; ++t) {
        if (index.variable[t] >= N) throw DimensionError("decoder: query variable out of range");
        group[t] = (t / index.per_instance) * N + index.variable[t];
        auto [it, fresh] = seen.try_emplace({group[t], tau[t]}, fill[group[t]]);
        if (fresh) ++fill[group[t]];
        slot[t] = it->second;
    }
    const std::size_t P = *std::max_element(fill.begin(), fill.end());
    std::vector<double> grouped_tau(G * P, 0.0);
    std::vector<std::size_t> gather(T);
    for (std::size_t t = 0; t < T; ++t) {
        gather[t] = group[t] * P + slot[t];
        grouped_tau[gather[t]] = tau[t];
    }
    Tensor u = embed_future_queries(Tensor::from({G, P}, std::move(grouped_tau)));  // [G, P, D]
    Tensor global_ctx = ops::reshape(encoded.summary, {G, 1, D});
    Tensor local_ctx = ops::reshape(ops::permute(encoded.patches, {0, 2, 1, 3}), {G, M, D});
    Tensor y = predict(decode_global(u, global_ctx), decode_local(u, local_ctx));  // [G, P]
    return ops::reshape(ops::index_select(ops::reshape(y, {G * P}), 0, gather), {B, index.per_instance});
}

Tensor ForecastDecoder::forward_grid(const Encoded& encoded, const Tensor& tau) const {
    const std::size_t B = encoded.summary.dim(0), N = encoded.summary.dim(1);
    const std::size_t M = encoded.patches.dim(1), D = dim_;
    if (tau.rank() != 2 || tau.dim(0) != B) {
        throw DimensionError("decoder: tau must be [B, L_pred], got " + shape_str(tau.shape()));
    }
    const std::size_t P = tau.dim(1);
    std::vector<std::size_t> owner(B * N);
    for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / N;
    Tensor u = embed_future_queries(ops::index_select(tau, 0, owner));  // [B*N, P, D]
    Tensor global_ctx = ops::reshape(encoded.summary, {B * N, 1, D});
    Tensor local_ctx = ops::reshape(ops::permute(encoded.patches, {0, 2, 1, 3}), {B * N, M, D});
    Tensor y = predict(decode_global(u, global_ctx), decode_local(u, local_ctx));  // [B*N, P]
    return ops::permute(ops::reshape(y, {B, N, P}), {0, 2, 1});
}

ClassifierHead::ClassifierHead(ParamStore& params, const std::string& prefix, std::size_t num_variables,
                               std::size_t dim, std::size_t num_classes)
    : num_variables_(num_variables), dim_(dim), num_classes_(num_classes) {
    if (num_classes < 2) throw ValidationError("classifier needs at least two classes");
    auto& rng = params.rng();
    const std::size_t in = num_variables * dim;
    w1_ = params.add(join_path(prefix, "w1"), xavier_weight(in, dim, rng));
    b1_ = params.add(join_path(prefix, "b1"), Tensor::zeros({dim}));
    w2_ = params.add(join_path(prefix, "w2"), xavier_weight(dim, dim, rng));
    b2_ = params.add(join_path(prefix, "b2"), Tensor::zeros({dim}));
    w3_ = params.add(join_path(prefix, "w3"), xavier_weight(dim, num_classes, rng));
    b3_ = params.add(join_path(prefix, "b3"), Tensor::zeros({num_classes}));
}

Tensor ClassifierHead::forward(const Encoded& encoded) const {
    const Shape& s = encoded.summary.shape();
    if (s.size() != 3 || s[1] != num_variables_ || s[2] != dim_) {
        throw DimensionError("classifier expects C[B, " + std::to_string(num_variables_) + ", " +
                             std::to_string(dim_) + "], got " + shape_str(s));
    }
    Tensor h = ops::reshape(encoded.summary, {s[0], num_variables_ * dim_});
    h = ops::relu(ops::linear(h, w1_, b1_));
    h = ops::relu(ops::linear(h, w2_, b2_));
    return ops::linear(h, w3_, b3_);
}

}  // namespace quite::model
