#include "quite/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "quite/errors.hpp"

namespace quite {

namespace {

void compare(std::span<const double> analytic, const std::vector<double>& numeric, const std::string& label,
             GradCheckTolerance tol, GradCheckReport& report) {
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double a = analytic.empty() ? 0.0 : analytic[i];
        const double n = numeric[i];
        const double abs_err = std::abs(a - n);
        const double scale = std::max(std::abs(a), std::abs(n));
        const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
        ++report.coordinates;
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        // Near zero the relative error is meaningless and the absolute bound
        // takes over.
        if (scale > tol.abs && rel_err > report.max_rel_err) {
            report.max_rel_err = rel_err;
            report.worst = label + "[" + std::to_string(i) + "]";
        }
        if (abs_err > tol.abs && rel_err > tol.rel) ++report.failures;
    }
}

double eval_scalar(const Tensor& t) {
    if (t.size() != 1) throw DimensionError("gradient check needs a scalar function, got " + shape_str(t.shape()));
    return t.item();
}

}  // namespace

void GradCheckReport::merge(const GradCheckReport& other) {
    if (other.max_rel_err > max_rel_err) {
        max_rel_err = other.max_rel_err;
        worst = other.worst;
    }
    max_abs_err = std::max(max_abs_err, other.max_abs_err);
    coordinates += other.coordinates;
    failures += other.failures;
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h,
                                  GradCheckTolerance tol) {
    x.set_requires_grad(true);
    x.clear_grad();
    Tensor loss = f(x);
    eval_scalar(loss);
    loss.backward();
    std::vector<double> analytic(x.grad().begin(), x.grad().end());
    x.clear_grad();

    std::vector<double> numeric(x.size());
    {
        NoGradGuard guard;
        auto data = x.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            const double up = eval_scalar(f(x));
            data[i] = saved - h;
            const double down = eval_scalar(f(x));
            data[i] = saved;
            numeric[i] = (up - down) / (2.0 * h);
        }
    }
    GradCheckReport report;
    compare(analytic, numeric, "x", tol, report);
    return report;
}

GradCheckReport finite_diff_check_params(const std::function<Tensor()>& loss_fn, ParamStore& params, double h,
                                         GradCheckTolerance tol) {
    for (const auto& [name, p] : params) {
        Tensor t = p;
        t.clear_grad();
    }
    Tensor loss = loss_fn();
    eval_scalar(loss);
    loss.backward();

    GradCheckReport report;
    for (const auto& [name, p] : params) {
        Tensor t = p;
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        t.clear_grad();
        std::vector<double> numeric(t.size());
        {
            NoGradGuard guard;
            auto data = t.mutable_data();
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double saved = data[i];
                data[i] = saved + h;
                const double up = eval_scalar(loss_fn());
                data[i] = saved - h;
                const double down = eval_scalar(loss_fn());
                data[i] = saved;
                numeric[i] = (up - down) / (2.0 * h);
            }
        }
        compare(analytic, numeric, name, tol, report);
    }
    return report;
}

}  // namespace quite
