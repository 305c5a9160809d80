#pragma once

// Naive serial reference kernels. Kept independent of the im2col/GEMM path
// so tests and the benchmark can cross-check against them.

#include "firecast/tensor.hpp"

namespace firecast {

template <typename T>
Tensor<T> conv2d_reference(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                           int pad) {
    const int c_in = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const int c_out = w.dim(0), k = w.dim(2);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (ww + 2 * pad - k) / stride + 1;
    Tensor<T> y({c_out, oh, ow});
    for (int oc = 0; oc < c_out; ++oc)
        for (int oi = 0; oi < oh; ++oi)
            for (int oj = 0; oj < ow; ++oj) {
                T acc = b.empty() ? T(0) : b[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < c_in; ++ic)
                    for (int ki = 0; ki < k; ++ki)
                        for (int kj = 0; kj < k; ++kj) {
                            const int ii = oi * stride + ki - pad;
                            const int jj = oj * stride + kj - pad;
                            if (ii < 0 || ii >= h || jj < 0 || jj >= ww) continue;
                            acc += x.at(ic, ii, jj) * w.at(oc, ic, ki, kj);
                        }
                y.at(oc, oi, oj) = acc;
            }
    return y;
}

} // namespace firecast
