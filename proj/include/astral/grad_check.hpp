#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "astral/layer.hpp"

namespace astral {

struct GradMismatch {
    std::string tensor;  // parameter name, or "input"
    std::size_t index;   // flat row-major index
    double analytic;
    double numeric;
    double rel_error;
};

struct CheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::vector<GradMismatch> failures;

    bool passed() const noexcept { return failures.empty(); }
};

/// Relative error with a small denominator floor so that coordinates whose
/// true gradient is ~0 are judged by absolute error instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

/// Central-difference gradient check of the scalar loss sum(forward()).
///
/// `forward()` recomputes the output from the current parameter values and
/// `*input`; `backward(grad_out)` returns dL/dinput (or an empty tensor when
/// the input is not differentiable, in which case pass input = nullptr).
/// Every component of every parameter and of *input is probed.
template <class Forward, class Backward>
CheckReport grad_check(LayerParams& params, Tensor* input, Forward&& forward, Backward&& backward, double step,
                       double tolerance) {
    if (!(step > 0.0)) throw ArgumentError("grad_check: step must be positive");
    params.zero_grads();
    const Tensor out = forward();
    if (!out.all_finite()) throw NumericError("grad_check: non-finite forward output");
    const Tensor input_grad = backward(Tensor(out.shape(), 1.0));

    CheckReport report;
    auto probe = [&](const std::string& label, Tensor& target, const Tensor& analytic) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double saved = target[i];
            target[i] = saved + step;
            const double plus = sum(forward());
            target[i] = saved - step;
            const double minus = sum(forward());
            target[i] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw NumericError("grad_check: non-finite loss while probing " + label + "[" +
                                   std::to_string(i) + "]");
            }
            const double numeric = (plus - minus) / (2.0 * step);
            const double err = relative_error(analytic[i], numeric);
            report.max_rel_error = std::max(report.max_rel_error, err);
            ++report.checked;
            if (err > tolerance) report.failures.push_back({label, i, analytic[i], numeric, err});
        }
    };

    for (auto& entry : params.entries()) {
        const Tensor analytic = entry.grad;
        probe(entry.name, entry.value, analytic);
    }
    if (input != nullptr && !input_grad.empty()) probe("input", *input, input_grad);
    forward();  // leave caches consistent with the unperturbed point
    return report;
}

/// Gradient check of a tensor layer at `input`, over parameters and input.
inline CheckReport grad_check(Layer& layer, Tensor input, double step = 1e-5, double tolerance = 1e-4) {
    return grad_check(
        layer.params(), &input, [&] { return layer.forward(input); },
        [&](const Tensor& g) { return layer.backward(g); }, step, tolerance);
}

}  // namespace astral
