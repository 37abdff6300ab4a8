#pragma once

// Finite-difference gradient verification harness.

#include <algorithm>
#include <cmath>

#include "xrv/tensor.hpp"

namespace xrv {

// Checks d f / d x against central finite differences.
//
// f must be a deterministic scalar-valued function of one tensor. The
// analytic side runs f under a fresh tape and reads back x's gradient; the
// numeric side evaluates f at x +- eps per component with recording paused.
// Returns the max over components of
//     |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// analytic_scale deliberately corrupts the analytic gradient (a test hook:
// scale 2 must be detected as error ~ 1/3).
template <typename T, typename F>
T grad_check(F&& f, const Tensor<T>& x, T eps, T analytic_scale = T(1)) {
    Tensor<T> probe = x.clone();
    probe.set_requires_grad(true);

    std::vector<T> analytic;
    {
        Tape<T> tape;
        Tensor<T> y = f(probe);
        if (y.size() != 1) throw ContractError("grad_check requires a scalar-valued function");
        backward(y);
        analytic = probe.grad();
    }
    for (T& g : analytic) g *= analytic_scale;

    T max_err = 0;
    {
        typename Tape<T>::Pause pause;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const T saved = probe.data()[i];
            probe.data()[i] = saved + eps;
            const T hi = f(probe).item();
            probe.data()[i] = saved - eps;
            const T lo = f(probe).item();
            probe.data()[i] = saved;
            const T numeric = (hi - lo) / (T(2) * eps);
            const T denom = std::max(T(1e-8), std::abs(analytic[i]) + std::abs(numeric));
            max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
        }
    }
    return max_err;
}

}  // namespace xrv
