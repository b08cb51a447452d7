#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "quite/adam.hpp"
#include "quite/errors.hpp"
#include "quite/grad_check.hpp"
#include "quite/ops.hpp"

using namespace quite;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(data));
}

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 0.0) {
    ASSERT_EQ(t.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << "index " << i;
}

// Weighted sum against a fixed random probe turns any tensor into a scalar
// whose gradient exercises every output coordinate.
Tensor probe(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return ops::sum(ops::mul(y, random_tensor(y.shape(), rng)));
}

constexpr int kSeeds = 20;

}  // namespace

TEST(Matmul, IdentityAndSelector) {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    expect_values(ops::matmul(a, eye), {1, 2, 3, 4});
    auto row = Tensor::from({1, 2}, {1, 0});
    auto col = Tensor::from({2, 1}, {2, 5});
    expect_values(ops::matmul(row, col), {2});
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
    // Frozen from central differences (h = 1e-5): d sum(AB)/dA = [[3, 4]].
    auto a = Tensor::from({1, 2}, {1, 1}, true);
    auto b = Tensor::from({2, 1}, {3, 4});
    ops::sum(ops::matmul(a, b)).backward();
    expect_values(Tensor::from({1, 2}, {a.grad()[0], a.grad()[1]}), {3, 4}, 1e-12);
    auto report = finite_diff_check([&](const Tensor& x) { return ops::sum(ops::matmul(x, b)); },
                                    Tensor::from({1, 2}, {1, 1}));
    EXPECT_TRUE(report.passed());
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL();
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    }
}

TEST(Matmul, IntegerIdentityIsExact) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dist(-50, 50);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(12);
        for (auto& x : v) x = dist(rng);
        auto a = Tensor::from({3, 4}, v);
        std::vector<double> eye(16, 0.0);
        for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
        auto out = ops::matmul(a, Tensor::from({4, 4}, eye));
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(out.data()[i], v[i]);
    }
}

TEST(Matmul, BroadcastsBatchExtents) {
    std::mt19937_64 rng(3);
    auto a = random_tensor({2, 3, 2, 4}, rng);
    auto b = random_tensor({3, 4, 5}, rng);
    auto c = ops::matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 3, 2, 5}));
    // Spot-check one entry against a direct sum.
    double ref = 0.0;
    for (std::size_t k = 0; k < 4; ++k) ref += a.at({1, 2, 1, k}) * b.at({2, k, 3});
    EXPECT_NEAR(c.at({1, 2, 1, 3}), ref, 1e-14);
}

TEST(MaskedSoftmax, HandExamples) {
    expect_values(ops::masked_softmax(Tensor::from({2}, {0, 0}), Tensor::from({2}, {1, 1})), {0.5, 0.5}, 1e-15);
    auto single = ops::masked_softmax(Tensor::from({2}, {5, 99}), Tensor::from({2}, {1, 0}));
    EXPECT_EQ(single.data()[0], 1.0);
    EXPECT_EQ(single.data()[1], 0.0);
    // exp(ln 3) / (1 + 3) = 0.75
    expect_values(ops::masked_softmax(Tensor::from({2}, {0, std::log(3.0)}), Tensor::from({2}, {1, 1})),
                  {0.25, 0.75}, 1e-15);
}

TEST(MaskedSoftmax, DegenerateRowIsAnError) {
    EXPECT_THROW(ops::masked_softmax(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {1, 0, 0, 0})),
                 ValidationError);
}

TEST(MaskedSoftmax, RowsSumToOneAndInvalidAreZero) {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.5);
    for (int seed = 0; seed < kSeeds; ++seed) {
        auto scores = random_tensor({6, 7}, rng, -30, 30);
        std::vector<double> mask(42);
        for (std::size_t r = 0; r < 6; ++r) {
            for (std::size_t j = 0; j < 7; ++j) mask[r * 7 + j] = coin(rng) ? 1 : 0;
            mask[r * 7 + r % 7] = 1;
        }
        auto p = ops::masked_softmax(scores, Tensor::from({6, 7}, mask));
        for (std::size_t r = 0; r < 6; ++r) {
            double total = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                const double v = p.data()[r * 7 + j];
                if (mask[r * 7 + j] == 0) {
                    EXPECT_EQ(v, 0.0);
                    EXPECT_FALSE(std::signbit(v));
                }
                total += v;
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(LayerNorm, Examples) {
    auto g = Tensor::from({2}, {1, 1});
    auto b = Tensor::from({2}, {0, 0});
    // Population variance 1, epsilon 1e-5 shifts the result slightly.
    expect_values(ops::layer_norm(Tensor::from({2}, {1, 3}), g, b), {-1, 1}, 1e-5);
    expect_values(ops::layer_norm(Tensor::from({2}, {4.2, 4.2}), g, b), {0, 0}, 0.0);
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
    auto g = Tensor::from({3}, {1.0, 0.5, -2.0});
    auto b = Tensor::from({3}, {0.1, 0.2, 0.3});
    auto report = finite_diff_check([&](const Tensor& x) { return probe(ops::layer_norm(x, g, b), 5); },
                                    Tensor::from({3}, {0.3, -1.2, 2.0}));
    EXPECT_TRUE(report.passed()) << report.max_rel_err;
    EXPECT_LE(report.max_rel_err, 1e-4);
}

TEST(Elementwise, Examples) {
    expect_values(ops::sin(Tensor::from({1}, {0})), {0});
    expect_values(ops::add(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4})), {4, 6});
    auto x = Tensor::from({1}, {0.0}, true);
    ops::sum(ops::sin(x)).backward();
    EXPECT_EQ(x.grad()[0], 1.0);
    EXPECT_THROW(ops::add(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
}

TEST(Backward, SumAndMse) {
    auto x = Tensor::from({2}, {0.7, -3.0}, true);
    ops::sum(x).backward();
    EXPECT_EQ(x.grad()[0], 1.0);
    EXPECT_EQ(x.grad()[1], 1.0);

    auto y = Tensor::from({1}, {2.0}, true);
    ops::mse_loss(y, Tensor::zeros({1})).backward();
    EXPECT_DOUBLE_EQ(y.grad()[0], 4.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    ops::sum(ops::scale(x, 3.0)).backward();
    ops::sum(ops::scale(x, 3.0)).backward();
    EXPECT_EQ(x.grad()[0], 6.0);
    x.zero_grad();
    ops::sum(ops::scale(x, 3.0)).backward();
    EXPECT_EQ(x.grad()[1], 3.0);
}

TEST(Backward, NonScalarLossIsAnError) {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    EXPECT_THROW(ops::scale(x, 2.0).backward(), DimensionError);
}

TEST(Backward, CompositeSoftmaxMatmulMatchesFiniteDifferences) {
    std::mt19937_64 rng(21);
    auto v = random_tensor({4, 3}, rng);
    auto mask = Tensor::from({1, 4}, {1, 0, 1, 1});
    auto report = finite_diff_check(
        [&](const Tensor& s) { return probe(ops::matmul(ops::masked_softmax(s, mask), v), 9); },
        random_tensor({2, 4}, rng, -2, 2));
    EXPECT_TRUE(report.passed()) << report.max_rel_err;
}

TEST(Tensor, NonFiniteResultIsAnError) {
    auto x = Tensor::from({1}, {1e308});
    EXPECT_THROW(ops::scale(x, 10.0), NumericalError);
    EXPECT_THROW(Tensor::from({1}, {std::nan("")}), NumericalError);
}

// Every differentiable operation against central differences on random
// inputs, 20 seeds each.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, AllOpsMatchFiniteDifferences) {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    std::mt19937_64 rng(seed);
    auto check = [&](const char* name, const std::function<Tensor(const Tensor&)>& f, Tensor x) {
        auto r = finite_diff_check(f, std::move(x));
        EXPECT_TRUE(r.passed()) << name << " max_rel_err " << r.max_rel_err << " at " << r.worst;
    };
    auto other = random_tensor({3, 4}, rng);
    auto row = random_tensor({4}, rng);
    check("add", [&](const Tensor& x) { return probe(ops::add(x, row), seed); }, random_tensor({3, 4}, rng));
    check("add_bcast", [&](const Tensor& x) { return probe(ops::add(other, x), seed); }, random_tensor({4}, rng));
    check("sub", [&](const Tensor& x) { return probe(ops::sub(other, x), seed); }, random_tensor({3, 4}, rng));
    check("mul", [&](const Tensor& x) { return probe(ops::mul(x, other), seed); }, random_tensor({3, 4}, rng));
    check("mul_self", [&](const Tensor& x) { return probe(ops::mul(x, x), seed); }, random_tensor({3, 4}, rng));
    check("mul_bcast", [&](const Tensor& x) { return probe(ops::mul(other, x), seed); },
          random_tensor({3, 1}, rng));
    check("scale", [&](const Tensor& x) { return probe(ops::scale(x, -1.7), seed); }, random_tensor({5}, rng));
    check("sin", [&](const Tensor& x) { return probe(ops::sin(x), seed); }, random_tensor({6}, rng, -4, 4));
    check("relu", [&](const Tensor& x) { return probe(ops::relu(x), seed); }, random_tensor({6}, rng));
    auto ma = random_tensor({2, 4, 3}, rng);
    check("matmul_a", [&](const Tensor& x) { return probe(ops::matmul(x, ma), seed); },
          random_tensor({2, 3, 4}, rng));
    auto mb = random_tensor({2, 3, 4}, rng);
    check("matmul_b", [&](const Tensor& x) { return probe(ops::matmul(mb, x), seed); }, random_tensor({4, 2}, rng));
    auto w = random_tensor({4, 3}, rng);
    auto bias = random_tensor({3}, rng);
    check("linear_x", [&](const Tensor& x) { return probe(ops::linear(x, w, bias), seed); },
          random_tensor({2, 2, 4}, rng));
    auto lx = random_tensor({5, 4}, rng);
    check("linear_w", [&](const Tensor& x) { return probe(ops::linear(lx, x, bias), seed); },
          random_tensor({4, 3}, rng));
    check("linear_b", [&](const Tensor& x) { return probe(ops::linear(lx, w, x), seed); }, random_tensor({3}, rng));
    check("sum_axis", [&](const Tensor& x) { return probe(ops::sum_axis(x, 1), seed); },
          random_tensor({2, 3, 4}, rng));
    check("mean", [&](const Tensor& x) { return ops::mean(ops::mul(x, x)); }, random_tensor({7}, rng));
    check("reshape", [&](const Tensor& x) { return probe(ops::reshape(x, {6, 2}), seed); },
          random_tensor({3, 4}, rng));
    check("permute", [&](const Tensor& x) { return probe(ops::permute(x, {2, 0, 1}), seed); },
          random_tensor({2, 3, 4}, rng));
    check("concat", [&](const Tensor& x) { return probe(ops::concat({x, other, x}, 0), seed); },
          random_tensor({1, 4}, rng));
    check("slice", [&](const Tensor& x) { return probe(ops::slice(x, 1, 1, 2), seed); },
          random_tensor({3, 4}, rng));
    const std::vector<std::size_t> idx{2, 0, 2};
    check("index_select", [&](const Tensor& x) { return probe(ops::index_select(x, 0, idx), seed); },
          random_tensor({3, 4}, rng));
    auto mask = Tensor::from({1, 5}, {1, 1, 0, 1, 0});
    check("masked_softmax", [&](const Tensor& x) { return probe(ops::masked_softmax(x, mask), seed); },
          random_tensor({3, 5}, rng, -3, 3));
    auto gain = random_tensor({4}, rng);
    auto lb = random_tensor({4}, rng);
    check("layer_norm_x", [&](const Tensor& x) { return probe(ops::layer_norm(x, gain, lb), seed); },
          random_tensor({3, 4}, rng, -2, 2));
    auto lnx = random_tensor({3, 4}, rng, -2, 2);
    check("layer_norm_gain", [&](const Tensor& x) { return probe(ops::layer_norm(lnx, x, lb), seed); },
          random_tensor({4}, rng));
    check("layer_norm_bias", [&](const Tensor& x) { return probe(ops::layer_norm(lnx, gain, x), seed); },
          random_tensor({4}, rng));
    auto target = random_tensor({2, 3}, rng);
    auto weight = Tensor::from({2, 3}, {1, 0, 1, 1, 1, 0});
    check("mse_loss", [&](const Tensor& x) { return ops::mse_loss(x, target, weight); }, random_tensor({2, 3}, rng));
    const std::vector<int> labels{2, 0, 1};
    check("cross_entropy", [&](const Tensor& x) { return ops::cross_entropy(x, labels); },
          random_tensor({3, 4}, rng, -2, 2));
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(1, kSeeds + 1));

TEST(FiniteDiffCheck, QuadraticAndConstant) {
    auto r = finite_diff_check([](const Tensor& x) { return ops::sum(ops::mul(x, x)); },
                               Tensor::from({2}, {1, 2}));
    EXPECT_LE(r.max_rel_err, 1e-8);
    EXPECT_TRUE(r.passed());
    auto c = finite_diff_check([](const Tensor& x) { return ops::sum(ops::scale(x, 0.0)); },
                               Tensor::from({2}, {1, 2}));
    EXPECT_EQ(c.max_abs_err, 0.0);
    EXPECT_TRUE(c.passed());
}

TEST(FiniteDiffCheck, DetectsInjectedFault) {
    fault_injection::set_gradient_fault("sin", 1.5);
    auto r = finite_diff_check([](const Tensor& x) { return ops::sum(ops::sin(x)); }, Tensor::from({2}, {0.3, 1.1}));
    fault_injection::clear_gradient_fault();
    EXPECT_FALSE(r.passed());
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamStore store;
    auto p = store.add("w", Tensor::from({1}, {0.5}));
    p.mutable_grad()[0] = 1.0;
    AdamState state;
    adam_step(store, state);
    // m_hat = 1, v_hat = 1 after bias correction: delta = -lr * 1 / (1 + 1e-8).
    EXPECT_NEAR(p.data()[0] - 0.5, -1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    ParamStore store;
    auto p = store.add("w", Tensor::from({2}, {0.5, -1.0}));
    p.mutable_grad();
    AdamState state;
    adam_step(store, state);
    EXPECT_EQ(p.data()[0], 0.5);
    EXPECT_EQ(p.data()[1], -1.0);
}

TEST(Adam, TwoUnitStepsDescendMonotonically) {
    ParamStore store;
    auto p = store.add("w", Tensor::from({1}, {0.0}));
    AdamState state;
    std::vector<double> trace{0.0};
    for (int i = 0; i < 2; ++i) {
        p.mutable_grad()[0] = 1.0;
        adam_step(store, state);
        trace.push_back(p.data()[0]);
    }
    // Both steps equal -lr up to epsilon: m_hat = v_hat = 1 at t = 1 and t = 2.
    EXPECT_LT(trace[1], trace[0]);
    EXPECT_LT(trace[2], trace[1]);
    EXPECT_NEAR(trace[2], -2e-3, 1e-10);
}

TEST(Adam, MissingGradientIsAnError) {
    ParamStore store;
    store.add("w", Tensor::from({1}, {0.0}));
    AdamState state;
    EXPECT_THROW(adam_step(store, state), ValidationError);
}

TEST(ParamStore, DeterministicSortedIteration) {
    ParamStore store;
    store.add("b.x", Tensor::zeros({1}));
    store.add("a.y", Tensor::zeros({2}));
    store.add("c", Tensor::zeros({3}));
    EXPECT_EQ(store.names(), store.names());
    EXPECT_EQ(store.names(), (std::vector<std::string>{"a.y", "b.x", "c"}));
    EXPECT_THROW(store.add("c", Tensor::zeros({1})), ValidationError);
    EXPECT_EQ(store.total_elements(), 6u);
}
