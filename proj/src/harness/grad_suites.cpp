#include <random>

#include "quite/errors.hpp"
#include "quite/harness.hpp"
#include "quite/ops.hpp"

namespace quite::harness {

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// Values bounded away from zero, for relu.
Tensor off_zero(Shape shape, std::mt19937_64& rng) {
    Tensor t = uniform(std::move(shape), rng, 0.1, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (auto& x : t.mutable_data())
        if (flip(rng)) x = -x;
    return t;
}

data::ImtsInstance random_instance(std::mt19937_64& rng, std::size_t N, std::size_t max_obs, double horizon) {
    std::uniform_int_distribution<std::size_t> count(1, max_obs);
    std::uniform_real_distribution<double> when(0.0, horizon);
    std::normal_distribution<double> value(0.0, 1.0);
    data::ImtsInstance inst;
    inst.id = "g";
    inst.variables.resize(N);
    for (auto& obs : inst.variables) {
        const std::size_t n = count(rng);
        for (std::size_t i = 0; i < n; ++i) obs.push_back({value(rng), when(rng), 1});
    }
    return inst;
}

using Unary = std::function<Tensor(const Tensor&)>;

GradCheckEntry check_input(const std::string& name, Tensor x, const Unary& op, std::mt19937_64& rng) {
    const Tensor weights = uniform(op(x.detach()).shape(), rng);
    auto f = [&](const Tensor& v) { return ops::sum(ops::mul(op(v), weights)); };
    return {name, finite_diff_check(f, std::move(x))};
}

std::vector<GradCheckEntry> ops_suite(std::mt19937_64& rng) {
    std::vector<GradCheckEntry> out;
    const Tensor b23 = uniform({2, 3}, rng), b3 = uniform({3}, rng), w34 = uniform({3, 4}, rng);
    const Tensor w42 = uniform({4, 2}, rng), b4 = uniform({4}, rng);
    out.push_back(check_input("add", uniform({2, 3}, rng), [&](const Tensor& a) { return ops::add(a, b3); }, rng));
    out.push_back(check_input("sub", uniform({3}, rng), [&](const Tensor& a) { return ops::sub(b23, a); }, rng));
    out.push_back(check_input("mul", uniform({2, 3}, rng), [&](const Tensor& a) { return ops::mul(a, b23); }, rng));
    out.push_back(check_input("mul_broadcast", uniform({3}, rng), [&](const Tensor& a) { return ops::mul(b23, a); }, rng));
    out.push_back(check_input("scale", uniform({4}, rng), [](const Tensor& a) { return ops::scale(a, -1.7); }, rng));
    out.push_back(check_input("sin", uniform({5}, rng, -3.0, 3.0), [](const Tensor& a) { return ops::sin(a); }, rng));
    out.push_back(check_input("relu", off_zero({6}, rng), [](const Tensor& a) { return ops::relu(a); }, rng));
    out.push_back(check_input("matmul", uniform({2, 3, 4}, rng), [&](const Tensor& a) { return ops::matmul(a, w42); }, rng));
    out.push_back(check_input("matmul_rhs", uniform({4, 2}, rng), [&](const Tensor& a) { return ops::matmul(b23, ops::matmul(w34, a)); }, rng));
    out.push_back(check_input("linear", uniform({3, 4}, rng), [&](const Tensor& w) { return ops::linear(b23, w, b4); }, rng));
    out.push_back(check_input("sum", uniform({2, 3}, rng), [](const Tensor& a) { return ops::sum(a); }, rng));
    out.push_back(check_input("mean", uniform({2, 3}, rng), [](const Tensor& a) { return ops::mean(a); }, rng));
    out.push_back(check_input("sum_axis", uniform({2, 3, 2}, rng), [](const Tensor& a) { return ops::sum_axis(a, 1); }, rng));
    out.push_back(check_input("reshape", uniform({2, 3}, rng), [](const Tensor& a) { return ops::reshape(a, {3, 2}); }, rng));
    out.push_back(check_input("permute", uniform({2, 3, 4}, rng), [](const Tensor& a) { return ops::permute(a, {2, 0, 1}); }, rng));
    out.push_back(check_input("concat", uniform({2, 2}, rng), [&](const Tensor& a) { return ops::concat({a, b23, a}, 1); }, rng));
    out.push_back(check_input("slice", uniform({4, 3}, rng), [](const Tensor& a) { return ops::slice(a, 0, 1, 2); }, rng));
    const std::vector<std::size_t> picks{2, 0, 2, 1};
    out.push_back(check_input("index_select", uniform({3, 2}, rng), [&](const Tensor& a) { return ops::index_select(a, 0, picks); }, rng));
    const Tensor mask = Tensor::from({2, 4}, {1, 0, 1, 1, 0, 1, 1, 0});
    out.push_back(check_input("masked_softmax", uniform({2, 4}, rng, -2.0, 2.0), [&](const Tensor& a) { return ops::masked_softmax(a, mask); }, rng));
    out.push_back(check_input("softmax", uniform({3, 4}, rng, -2.0, 2.0), [](const Tensor& a) { return ops::softmax(a); }, rng));
    const Tensor gain = uniform({4}, rng, 0.5, 1.5), bias = uniform({4}, rng);
    out.push_back(check_input("layer_norm", uniform({3, 4}, rng), [&](const Tensor& a) { return ops::layer_norm(a, gain, bias); }, rng));
    const Tensor target = uniform({2, 3}, rng), weight = Tensor::from({2, 3}, {1, 0, 1, 1, 1, 0});
    out.push_back(check_input("mse_loss", uniform({2, 3}, rng), [&](const Tensor& a) { return ops::mse_loss(a, target, weight); }, rng));
    const std::vector<int> labels{2, 0};
    out.push_back(check_input("cross_entropy", uniform({2, 3}, rng), [&](const Tensor& a) { return ops::cross_entropy(a, labels); }, rng));
    return out;
}

std::vector<GradCheckEntry> embed_suite(std::mt19937_64& rng) {
    using namespace embed;
    std::vector<GradCheckEntry> out;
    const data::TimeWindow scale{0.0, 48.0};
    const data::PatchSpec patches{12.0, 12.0, {0.0, 24.0}};
    auto inst = random_instance(rng, 2, 3, 24.0);
    const data::PaddedBatch var_batch = data::batch_pad({&inst}, scale);
    const data::PaddedBatch patch_batch = data::batch_pad({&inst}, patches, scale);

    {
        ParamStore params(rng());
        TimeEmbedder time(params, "time", 4);
        const Tensor t = uniform({3}, rng, 0.0, 1.0);
        const Tensor w = uniform({3, 4}, rng);
        out.push_back({"time_embedding", finite_diff_check_params(
                                             [&] { return ops::sum(ops::mul(time(t), w)); }, params)});
    }
    {
        ParamStore params(rng());
        AttnBlock block(params, "block", 4, 2);
        const Tensor x = uniform({2, 3, 4}, rng);
        const Tensor keys = Tensor::from({2, 3}, {1, 1, 0, 1, 0, 1});
        std::mt19937_64 fixed(rng());
        const Tensor w = uniform({2, 3, 4}, fixed);
        out.push_back({"self_attention", finite_diff_check_params(
                                             [&] { return ops::sum(ops::mul(block.self_attend(x, keys), w)); }, params)});
    }
    {
        ParamStore params(rng());
        AttnBlock block(params, "block", 4, 1, true);
        const Tensor q = uniform({2, 2, 4}, rng), ctx = uniform({2, 3, 4}, rng);
        std::mt19937_64 fixed(rng());
        const Tensor w = uniform({2, 2, 4}, fixed);
        out.push_back({"cross_attention", finite_diff_check_params(
                                              [&] { return ops::sum(ops::mul(block.cross_attend(q, ctx), w)); }, params)});
    }
    {
        ParamStore params(rng());
        AttnBlock block(params, "block", 4, 1);
        const Tensor query = uniform({1, 4}, rng);
        const Tensor masks = Tensor::from({1, 2}, {1, 1});
        out.push_back(check_input("aggregate_tokens", uniform({1, 2, 4}, rng),
                                  [&](const Tensor& z) { return aggregate(block, query, z, masks); }, rng));
    }
    for (auto kind : {EmbeddingKind::quite, EmbeddingKind::add, EmbeddingKind::concat, EmbeddingKind::meanpool,
                      EmbeddingKind::conventional}) {
        for (bool patched : {false, true}) {
            ParamStore params(rng());
            TimeEmbedder time(params, "time", 4);
            EmbeddingLayout layout;
            layout.num_variables = 2;
            layout.num_patches = patched ? 2 : 0;
            layout.dim = 4;
            layout.heads = 1;
            layout.query_init = QueryInit::xavier;
            layout.grid_width = 3;
            layout.grid_region = patched ? 0.25 : 0.5;
            auto embedding = make_embedding(params, "embed", kind, layout, time);
            const auto& batch = patched ? patch_batch : var_batch;
            std::mt19937_64 fixed(rng());
            const Tensor w = uniform(embedding->forward(batch).embedding.shape(), fixed);
            auto loss = [&] { return ops::sum(ops::mul(embedding->forward(batch).embedding, w)); };
            for (const auto& [name, t] : params) Tensor(t).clear_grad();
            {
                // Parameters that do not reach this embedding's output are
                // excluded from the comparison.
                Tensor l = loss();
                l.backward();
            }
            ParamStore used(0);
            for (const auto& [name, t] : params)
                if (t.has_grad()) used.add(name, t);
            for (const auto& [name, t] : params) Tensor(t).clear_grad();
            out.push_back({"embedding_" + to_string(kind) + (patched ? "_patch" : "_variable"),
                           finite_diff_check_params(loss, used)});
        }
    }
    return out;
}

std::vector<GradCheckEntry> model_suite(std::mt19937_64& rng) {
    using model::Architecture;
    std::vector<GradCheckEntry> out;
    const data::TimeWindow scale{0.0, 48.0};
    const data::PatchSpec patches{12.0, 12.0, {0.0, 24.0}};
    auto inst = random_instance(rng, 2, 3, 24.0);
    const Tensor tau = Tensor::from({1, 2}, {0.6, 0.85});
    const Tensor target = uniform({1, 2, 2}, rng);

    struct Case {
        std::string name;
        Architecture arch;
        embed::EmbeddingKind kind;
        std::size_t layers;
        std::size_t classes;
    };
    const std::vector<Case> cases{
        {"quitepp_forecast", Architecture::quitepp, embed::EmbeddingKind::quite, 1, 0},
        {"quitepp_classifier", Architecture::quitepp, embed::EmbeddingKind::quite, 1, 2},
        {"patch_transformer_conventional", Architecture::patch_transformer, embed::EmbeddingKind::conventional, 1, 0},
        {"patch_transformer_quite", Architecture::patch_transformer, embed::EmbeddingKind::quite, 1, 0},
        {"variate_transformer_quite", Architecture::variate_transformer, embed::EmbeddingKind::quite, 1, 0},
    };
    for (const auto& c : cases) {
        model::ModelConfig cfg;
        cfg.architecture = c.arch;
        cfg.embedding = c.kind;
        cfg.query_init = embed::QueryInit::xavier;
        cfg.num_variables = 2;
        cfg.num_patches = 2;
        cfg.dim = 4;
        cfg.heads = 1;
        cfg.layers = c.layers;
        cfg.num_classes = c.classes;
        cfg.grid_width = 3;
        cfg.grid_region = cfg.patched() ? 0.25 : 0.5;
        cfg.seed = rng();
        model::Forecaster m(cfg);
        const data::PaddedBatch batch = cfg.patched() ? data::batch_pad({&inst}, patches, scale)
                                                      : data::batch_pad({&inst}, scale);
        const std::vector<int> labels{1};
        std::function<Tensor()> loss;
        if (c.classes > 0) {
            loss = [&] { return ops::cross_entropy(m.classify(batch), labels); };
        } else {
            loss = [&] { return ops::mse_loss(m.forecast_grid(batch, tau), target); };
        }
        // Skip parameters that cannot reach the loss (unused time embedding).
        loss().backward();
        ParamStore used(0);
        for (const auto& [name, t] : m.params())
            if (t.has_grad()) used.add(name, t);
        for (const auto& [name, t] : m.params()) Tensor(t).clear_grad();
        out.push_back({c.name, finite_diff_check_params(loss, used)});
    }
    return out;
}

}  // namespace

std::vector<GradCheckEntry> grad_check_suite(const std::string& scope, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (scope == "ops") return ops_suite(rng);
    if (scope == "embed") return embed_suite(rng);
    if (scope == "model") return model_suite(rng);
    if (scope == "all") {
        auto out = ops_suite(rng);
        for (auto& e : embed_suite(rng)) out.push_back(std::move(e));
        for (auto& e : model_suite(rng)) out.push_back(std::move(e));
        return out;
    }
    throw ValidationError("grad-check scope must be ops, embed, model or all; got '" + scope + "'");
}

}  // namespace quite::harness
