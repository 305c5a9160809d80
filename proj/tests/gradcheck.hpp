#pragma once

// Finite-difference gradient checking helpers (64-bit only; central
// differences with step 1e-5). Test-only code, independent of the layer
// backward implementations it verifies.

#include <cmath>
#include <functional>
#include <random>

#include "firecast/tensor.hpp"

namespace firecast::testing {

inline double rel_err(double a, double b) {
    const double denom = std::abs(a) + std::abs(b) + 1e-10;
    return std::abs(a - b) / denom;
}

// Central difference of `loss` w.r.t. one tensor entry.
template <typename LossFn>
double fd_entry(Tensor<double>& t, std::size_t idx, LossFn loss, double h = 1e-5) {
    const double saved = t[idx];
    t[idx] = saved + h;
    const double lp = loss();
    t[idx] = saved - h;
    const double lm = loss();
    t[idx] = saved;
    return (lp - lm) / (2.0 * h);
}

// Compares analytic gradient tensor against finite differences on up to
// `samples` entries; returns the max relative error seen.
template <typename LossFn>
double check_grad(Tensor<double>& param, const Tensor<double>& analytic, LossFn loss,
                  std::mt19937_64& rng, int samples = 24) {
    double worst = 0.0;
    const std::size_t n = param.numel();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const int count = std::min<int>(samples, static_cast<int>(n));
    for (int s = 0; s < count; ++s) {
        const std::size_t idx = (static_cast<std::size_t>(count) == n)
                                    ? static_cast<std::size_t>(s)
                                    : pick(rng);
        const double fd = fd_entry(param, idx, loss);
        worst = std::max(worst, rel_err(analytic[idx], fd));
    }
    return worst;
}

} // namespace firecast::testing
