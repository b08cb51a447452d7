#include <cmath>
#include <numbers>

#include "quite/embed.hpp"
#include "quite/errors.hpp"
#include "quite/ops.hpp"

namespace quite::embed {

QueryInit parse_query_init(const std::string& name) {
    if (name == "random" || name == "random_normal") return QueryInit::random_normal;
    if (name == "xavier") return QueryInit::xavier;
    if (name == "uniform") return QueryInit::uniform;
    if (name == "zero") return QueryInit::zero;
    throw ValidationError("unknown query init '" + name + "' (random_normal, xavier, uniform, zero)");
}

std::string to_string(QueryInit init) {
    switch (init) {
        case QueryInit::random_normal: return "random_normal";
        case QueryInit::xavier: return "xavier";
        case QueryInit::uniform: return "uniform";
        case QueryInit::zero: return "zero";
    }
    return "?";
}

Tensor init_queries(QueryInit scheme, const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> data(numel(shape), 0.0);
    switch (scheme) {
        case QueryInit::random_normal: {
            std::normal_distribution<double> dist(0.0, 0.02);
            for (auto& v : data) v = dist(rng);
            break;
        }
        case QueryInit::xavier: {
            const double fan_in = shape.empty() ? 1.0 : static_cast<double>(shape.back());
            const double fan_out = shape.empty() || shape.back() == 0
                                       ? 1.0
                                       : static_cast<double>(data.size()) / static_cast<double>(shape.back());
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : data) v = dist(rng);
            break;
        }
        case QueryInit::uniform: {
            std::uniform_real_distribution<double> dist(-0.1, 0.1);
            for (auto& v : data) v = dist(rng);
            break;
        }
        case QueryInit::zero: break;
    }
    return Tensor::from(shape, std::move(data));
}

Tensor xavier_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> data(fan_in * fan_out);
    for (auto& v : data) v = dist(rng);
    return Tensor::from({fan_in, fan_out}, std::move(data));
}

TimeEmbedder::TimeEmbedder(ParamStore& params, const std::string& prefix, std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("time embedding dimension must be positive");
    auto& rng = params.rng();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<double> w(dim), a(dim);
    w[0] = 1.0;
    a[0] = 0.0;
    for (std::size_t k = 1; k < dim; ++k) {
        w[k] = gauss(rng);
        a[k] = angle(rng);
    }
    frequency = params.add(join_path(prefix, "frequency"), Tensor::from({dim}, std::move(w)));
    phase = params.add(join_path(prefix, "phase"), Tensor::from({dim}, std::move(a)));
}

Tensor TimeEmbedder::operator()(const Tensor& t) const {
    Shape s = t.shape();
    s.push_back(1);
    Tensor linear = ops::add(ops::mul(ops::reshape(t, s), frequency), phase);
    if (dim_ == 1) return linear;
    return ops::concat({ops::slice(linear, -1, 0, 1), ops::sin(ops::slice(linear, -1, 1, dim_ - 1))}, -1);
}

ValueEmbedder::ValueEmbedder(ParamStore& params, const std::string& prefix, std::size_t dim) {
    weight = params.add(join_path(prefix, "weight"), xavier_weight(1, dim, params.rng()));
    bias = params.add(join_path(prefix, "bias"), Tensor::zeros({dim}));
}

Tensor ValueEmbedder::operator()(const Tensor& x) const {
    Shape s = x.shape();
    s.push_back(1);
    return ops::linear(ops::reshape(x, s), weight, bias);
}

Tensor tokenize(const ValueEmbedder& value, const TimeEmbedder& time, const Tensor& values, const Tensor& times) {
    if (values.shape() != times.shape()) {
        throw DimensionError("tokenize: values " + shape_str(values.shape()) + " vs times " +
                             shape_str(times.shape()));
    }
    return ops::add(value(values), time(times));
}

AttnBlock::AttnBlock(ParamStore& params, const std::string& prefix, std::size_t dim, std::size_t heads, bool cross)
    : dim_(dim), heads_(heads), cross_(cross) {
    if (heads == 0 || dim % heads != 0) {
        throw ValidationError("attention: dimension " + std::to_string(dim) + " not divisible by " +
                              std::to_string(heads) + " heads");
    }
    auto& rng = params.rng();
    auto p = [&](const std::string& name, Tensor t) { return params.add(join_path(prefix, name), std::move(t)); };
    ln1_gain_ = p("ln1.gain", Tensor::full({dim}, 1.0));
    ln1_bias_ = p("ln1.bias", Tensor::zeros({dim}));
    if (cross) {
        lnkv_gain_ = p("ln_kv.gain", Tensor::full({dim}, 1.0));
        lnkv_bias_ = p("ln_kv.bias", Tensor::zeros({dim}));
    }
    wq_ = p("attn.wq", xavier_weight(dim, dim, rng));
    bq_ = p("attn.bq", Tensor::zeros({dim}));
    wk_ = p("attn.wk", xavier_weight(dim, dim, rng));
    bk_ = p("attn.bk", Tensor::zeros({dim}));
    wv_ = p("attn.wv", xavier_weight(dim, dim, rng));
    bv_ = p("attn.bv", Tensor::zeros({dim}));
    wo_ = p("attn.wo", xavier_weight(dim, dim, rng));
    bo_ = p("attn.bo", Tensor::zeros({dim}));
    ln2_gain_ = p("ln2.gain", Tensor::full({dim}, 1.0));
    ln2_bias_ = p("ln2.bias", Tensor::zeros({dim}));
    ff1_w_ = p("ff.w1", xavier_weight(dim, 4 * dim, rng));
    ff1_b_ = p("ff.b1", Tensor::zeros({4 * dim}));
    ff2_w_ = p("ff.w2", xavier_weight(4 * dim, dim, rng));
    ff2_b_ = p("ff.b2", Tensor::zeros({dim}));
}

Tensor AttnBlock::attend(const Tensor& q_in, const Tensor& kv_in, const Tensor& key_mask, Tensor* weights) const {
    const std::size_t T = q_in.dim(0), P = q_in.dim(1), K = kv_in.dim(1);
    const std::size_t h = heads_, dh = dim_ / heads_;
    if (kv_in.dim(0) != T) {
        throw DimensionError("attention: query batch " + shape_str(q_in.shape()) + " vs context " +
                             shape_str(kv_in.shape()));
    }
    Tensor q = ops::permute(ops::reshape(ops::linear(q_in, wq_, bq_), {T, P, h, dh}), {0, 2, 1, 3});
    Tensor k = ops::permute(ops::reshape(ops::linear(kv_in, wk_, bk_), {T, K, h, dh}), {0, 2, 3, 1});
    Tensor v = ops::permute(ops::reshape(ops::linear(kv_in, wv_, bv_), {T, K, h, dh}), {0, 2, 1, 3});
    Tensor scores = ops::scale(ops::matmul(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor mask = key_mask.defined() ? ops::reshape(key_mask.detach(), {T, 1, 1, K}) : Tensor::full({1}, 1.0);
    Tensor probs = ops::masked_softmax(scores, mask);
    if (weights) *weights = probs;
    Tensor mixed = ops::reshape(ops::permute(ops::matmul(probs, v), {0, 2, 1, 3}), {T, P, dim_});
    return ops::linear(mixed, wo_, bo_);
}

Tensor AttnBlock::feed_forward(const Tensor& x) const {
    return ops::linear(ops::relu(ops::linear(x, ff1_w_, ff1_b_)), ff2_w_, ff2_b_);
}

Tensor AttnBlock::self_attend(const Tensor& x, const Tensor& key_mask, bool first_only) const {
    if (x.rank() != 3 || x.dim(2) != dim_) {
        throw DimensionError("self_attend expects [T, S, " + std::to_string(dim_) + "], got " + shape_str(x.shape()));
    }
    if (key_mask.defined() && key_mask.shape() != Shape{x.dim(0), x.dim(1)}) {
        throw DimensionError("self_attend: key mask " + shape_str(key_mask.shape()) + " vs input " +
                             shape_str(x.shape()));
    }
    Tensor normed = ops::layer_norm(x, ln1_gain_, ln1_bias_);
    Tensor queries = first_only ? ops::slice(normed, 1, 0, 1) : normed;
    Tensor residual = first_only ? ops::slice(x, 1, 0, 1) : x;
    Tensor y = ops::add(residual, attend(queries, normed, key_mask, nullptr));
    return ops::add(y, feed_forward(ops::layer_norm(y, ln2_gain_, ln2_bias_)));
}

Tensor AttnBlock::cross_attend(const Tensor& queries, const Tensor& context, const Tensor& key_mask) const {
    if (!cross_) throw ValidationError("cross_attend on a self-attention block");
    if (queries.rank() != 3 || context.rank() != 3 || queries.dim(2) != dim_ || context.dim(2) != dim_) {
        throw DimensionError("cross_attend: queries " + shape_str(queries.shape()) + ", context " +
                             shape_str(context.shape()));
    }
    Tensor qn = ops::layer_norm(queries, ln1_gain_, ln1_bias_);
    Tensor kvn = ops::layer_norm(context, lnkv_gain_, lnkv_bias_);
    Tensor y = ops::add(queries, attend(qn, kvn, key_mask, nullptr));
    return ops::add(y, feed_forward(ops::layer_norm(y, ln2_gain_, ln2_bias_)));
}

Tensor AttnBlock::attention_weights(const Tensor& queries, const Tensor& context) const {
    NoGradGuard guard;
    Tensor qn = ops::layer_norm(queries, ln1_gain_, ln1_bias_);
    Tensor kvn = cross_ ? ops::layer_norm(context, lnkv_gain_, lnkv_bias_) : ops::layer_norm(context, ln1_gain_, ln1_bias_);
    Tensor weights;
    attend(qn, kvn, {}, &weights);
    return weights;
}

}  // namespace quite::embed
