#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quite/param_store.hpp"

namespace quite {

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::map<std::string, std::vector<double>> first_moment;
    std::map<std::string, std::vector<double>> second_moment;
};

/// One bias-corrected Adam update over every parameter, then zeroes grads.
/// Throws ValidationError if some parameter never received a gradient.
void adam_step(ParamStore& params, AdamState& state);

}  // namespace quite
