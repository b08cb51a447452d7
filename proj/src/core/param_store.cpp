#include "quite/param_store.hpp"

#include <cmath>

#include "quite/adam.hpp"
#include "quite/errors.hpp"

namespace quite {

Tensor ParamStore::add(const std::string& name, Tensor value) {
    if (params_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    params_.emplace(name, value);
    return value;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    return out;
}

void ParamStore::zero_grad() {
    for (auto& [name, t] : params_) {
        Tensor handle = t;
        handle.zero_grad();
    }
}

void adam_step(ParamStore& params, AdamState& state) {
    for (const auto& [name, t] : params) {
        if (!t.has_grad()) throw ValidationError("adam_step: parameter '" + name + "' has no gradient");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (const auto& [name, param] : params) {
        Tensor p = param;
        auto& m = state.first_moment[name];
        auto& v = state.second_moment[name];
        if (m.size() != p.size()) m.assign(p.size(), 0.0);
        if (v.size() != p.size()) v.assign(p.size(), 0.0);
        auto w = p.mutable_data();
        const auto g = p.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
        p.zero_grad();
    }
}

}  // namespace quite
