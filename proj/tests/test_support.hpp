#pragma once

#include <random>
#include <vector>

#include "quite/imts.hpp"
#include "quite/ops.hpp"
#include "quite/tensor.hpp"

namespace quite::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(data));
}

// Weighted sum against a fixed random probe: a scalar whose gradient touches
// every coordinate of y.
inline Tensor probe(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return ops::sum(ops::mul(y, random_tensor(y.shape(), rng)));
}

// History-only instance with up to max_obs observations per variable inside
// [0, horizon); every variable gets at least `min_obs`.
inline data::ImtsInstance random_history(std::mt19937_64& rng, std::size_t num_variables, std::size_t max_obs,
                                         double horizon, std::size_t min_obs = 1) {
    std::uniform_int_distribution<std::size_t> count(min_obs, max_obs);
    std::uniform_real_distribution<double> when(0.0, horizon);
    std::normal_distribution<double> value(0.0, 1.0);
    data::ImtsInstance inst;
    inst.id = "r";
    inst.variables.resize(num_variables);
    for (auto& obs : inst.variables) {
        const std::size_t n = count(rng);
        for (std::size_t i = 0; i < n; ++i) obs.push_back({value(rng), when(rng), 1});
    }
    return inst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return 1e300;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

}  // namespace quite::test
