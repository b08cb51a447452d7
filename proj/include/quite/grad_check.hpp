#pragma once

#include <functional>
#include <string>

#include "quite/param_store.hpp"
#include "quite/tensor.hpp"

namespace quite {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t coordinates = 0;
    // Coordinates where both the relative and the absolute bound are exceeded.
    std::size_t failures = 0;
    std::string worst;  // label of the worst coordinate, for diagnostics

    bool passed() const { return failures == 0; }
    void merge(const GradCheckReport& other);
};

struct GradCheckTolerance {
    double rel = 1e-4;
    double abs = 1e-7;
};

/// Compares the reverse-mode gradient of scalar `f` at `x` with central
/// differences (f(x + h e_i) - f(x - h e_i)) / 2h, coordinate by coordinate.
/// `x` must be a leaf; its grad buffer is overwritten.
GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                                  double h = 1e-5, GradCheckTolerance tol = {});

/// Same comparison for every parameter of a store, with `loss` closing over
/// the store. Parameter grads are cleared before and after.
GradCheckReport finite_diff_check_params(const std::function<Tensor()>& loss, ParamStore& params,
                                         double h = 1e-5, GradCheckTolerance tol = {});

}  // namespace quite
