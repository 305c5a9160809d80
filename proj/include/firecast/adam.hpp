#pragma once

#include <cmath>
#include <vector>

#include "firecast/errors.hpp"
#include "firecast/tensor.hpp"

namespace firecast {

// Bias-corrected Adam over a flat list of parameter tensors. Moment slots are
// keyed by position, so the parameter list must be stable across steps.
template <typename T>
class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>*>& grads) {
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor<T>& p = *params[k];
            const Tensor<T>& g = *grads[k];
            Tensor<T>& m = m_[k];
            Tensor<T>& v = v_[k];
            for (std::size_t i = 0; i < p.numel(); ++i) {
                const double gi = g[i];
                if (!std::isfinite(gi)) throw NumericError("adam_step: non-finite gradient");
                m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * gi);
                v[i] = static_cast<T>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] = static_cast<T>(p[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int timestep() const { return t_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace firecast
