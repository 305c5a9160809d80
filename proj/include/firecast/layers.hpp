#pragma once

// Forward/backward kernels for the layers used by the forecasting models.
// Convolutions are im2col + GEMM (OpenBLAS); a naive serial reference for
// cross-checking lives in reference.hpp. All kernels are deterministic:
// parallel loops only ever split over disjoint outputs.

#include <cblas.h>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "firecast/tensor.hpp"

namespace firecast {

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline int conv_out_extent(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

// ---------------------------------------------------------------------------
// im2col / col2im

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, Tensor<T>& col) {
    const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = conv_out_extent(h, k, stride, pad);
    const int ow = conv_out_extent(w, k, stride, pad);
    const int cols = oh * ow;
    T* out = col.data();
#pragma omp parallel for
    for (int row = 0; row < c_in * k * k; ++row) {
        const int c = row / (k * k);
        const int ki = (row / k) % k;
        const int kj = row % k;
        T* dst = out + static_cast<std::size_t>(row) * cols;
        for (int oi = 0; oi < oh; ++oi) {
            const int ii = oi * stride + ki - pad;
            if (ii < 0 || ii >= h) {
                for (int oj = 0; oj < ow; ++oj) dst[oi * ow + oj] = T(0);
                continue;
            }
            const T* src = x.data() + (static_cast<std::size_t>(c) * h + ii) * w;
            for (int oj = 0; oj < ow; ++oj) {
                const int jj = oj * stride + kj - pad;
                dst[oi * ow + oj] = (jj >= 0 && jj < w) ? src[jj] : T(0);
            }
        }
    }
}

template <typename T>
void col2im(const Tensor<T>& col, int c_in, int h, int w, int k, int stride, int pad,
            Tensor<T>& x) {
    const int oh = conv_out_extent(h, k, stride, pad);
    const int ow = conv_out_extent(w, k, stride, pad);
    const int cols = oh * ow;
    x.fill(T(0));
    // Accumulation order is fixed (serial over rows) so results are bit-stable.
    for (int row = 0; row < c_in * k * k; ++row) {
        const int c = row / (k * k);
        const int ki = (row / k) % k;
        const int kj = row % k;
        const T* src = col.data() + static_cast<std::size_t>(row) * cols;
        for (int oi = 0; oi < oh; ++oi) {
            const int ii = oi * stride + ki - pad;
            if (ii < 0 || ii >= h) continue;
            T* dst = x.data() + (static_cast<std::size_t>(c) * h + ii) * w;
            for (int oj = 0; oj < ow; ++oj) {
                const int jj = oj * stride + kj - pad;
                if (jj >= 0 && jj < w) dst[jj] += src[oi * ow + oj];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation)

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                     int pad) {
    if (x.ndim() != 3) throw ShapeError("conv2d: input must be C x H x W");
    if (w.ndim() != 4) throw ShapeError("conv2d: weights must be Cout x Cin x k x k");
    if (x.dim(0) != w.dim(1)) throw ShapeError("conv2d: input channel axis mismatch");
    const int c_out = w.dim(0), c_in = w.dim(1), k = w.dim(2);
    const int oh = conv_out_extent(x.dim(1), k, stride, pad);
    const int ow = conv_out_extent(x.dim(2), k, stride, pad);
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: spatial axis too small for kernel");

    Tensor<T> col({c_in * k * k, oh * ow});
    im2col(x, k, stride, pad, col);
    Tensor<T> y({c_out, oh, ow});
    gemm(false, false, c_out, oh * ow, c_in * k * k, T(1), w.data(), c_in * k * k, col.data(),
         oh * ow, T(0), y.data(), oh * ow);
    if (!b.empty()) {
#pragma omp parallel for
        for (int c = 0; c < c_out; ++c) {
            T* row = y.data() + static_cast<std::size_t>(c) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) row[i] += b[static_cast<std::size_t>(c)];
        }
    }
    return y;
}

// Accumulates gw/gb; returns a fresh input gradient.
template <typename T>
Tensor<T> conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride,
                     int pad, Tensor<T>& gw, Tensor<T>& gb) {
    const int c_out = w.dim(0), c_in = w.dim(1), k = w.dim(2);
    const int oh = gy.dim(1), ow = gy.dim(2);
    const int cols = oh * ow;

    Tensor<T> col({c_in * k * k, cols});
    im2col(x, k, stride, pad, col);
    // gw += gy * col^T
    gemm(false, true, c_out, c_in * k * k, cols, T(1), gy.data(), cols, col.data(), cols, T(1),
         gw.data(), c_in * k * k);
    if (!gb.empty()) {
        for (int c = 0; c < c_out; ++c) {
            T s = 0;
            const T* row = gy.data() + static_cast<std::size_t>(c) * cols;
            for (int i = 0; i < cols; ++i) s += row[i];
            gb[static_cast<std::size_t>(c)] += s;
        }
    }
    // gcol = w^T * gy, then scatter back
    Tensor<T> gcol({c_in * k * k, cols});
    gemm(true, false, c_in * k * k, cols, c_out, T(1), w.data(), c_in * k * k, gy.data(), cols,
         T(0), gcol.data(), cols);
    Tensor<T> gx({x.dim(0), x.dim(1), x.dim(2)});
    col2im(gcol, c_in, x.dim(1), x.dim(2), k, stride, pad, gx);
    return gx;
}

// ---------------------------------------------------------------------------
// max pooling (ties take the first element in row-major window order)

template <typename T>
struct PoolCache {
    std::vector<int> argmax; // flat input index per output element
};

template <typename T>
Tensor<T> maxpool2d_fwd(const Tensor<T>& x, int k, int stride, PoolCache<T>& cache) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (k > h || k > w) throw ShapeError("maxpool2d: window larger than input");
    const int oh = (h - k) / stride + 1;
    const int ow = (w - k) / stride + 1;
    Tensor<T> y({c, oh, ow});
    cache.argmax.assign(y.numel(), 0);
#pragma omp parallel for
    for (int ci = 0; ci < c; ++ci) {
        for (int oi = 0; oi < oh; ++oi) {
            for (int oj = 0; oj < ow; ++oj) {
                T best = -std::numeric_limits<T>::infinity();
                int best_idx = -1;
                for (int ki = 0; ki < k; ++ki) {
                    for (int kj = 0; kj < k; ++kj) {
                        const int ii = oi * stride + ki, jj = oj * stride + kj;
                        const int idx = (ci * h + ii) * w + jj;
                        const T v = x[static_cast<std::size_t>(idx)];
                        if (v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(ci) * oh + oi) * ow + oj;
                y[o] = best;
                cache.argmax[o] = best_idx;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> maxpool2d_bwd(const Tensor<T>& gy, const PoolCache<T>& cache,
                        const std::vector<int>& input_shape) {
    Tensor<T> gx(input_shape);
    for (std::size_t o = 0; o < gy.numel(); ++o)
        gx[static_cast<std::size_t>(cache.argmax[o])] += gy[o];
    return gx;
}

// ---------------------------------------------------------------------------
// batch norm over the spatial axes of one C x H x W map

template <typename T>
struct BNCache {
    Tensor<T> xhat;
    std::vector<T> invstd;
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

template <typename T>
Tensor<T> batchnorm2d_fwd(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          bool train, Tensor<T>& running_mean, Tensor<T>& running_var,
                          BNCache<T>* cache) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int n = h * w;
    if (train && n <= 1) throw ShapeError("batchnorm2d: train mode needs more than one element");
    Tensor<T> y({c, h, w});
    if (train && cache) {
        cache->xhat = Tensor<T>({c, h, w});
        cache->invstd.assign(static_cast<std::size_t>(c), T(0));
    }
    for (int ci = 0; ci < c; ++ci) {
        const T* xc = x.data() + static_cast<std::size_t>(ci) * n;
        T* yc = y.data() + static_cast<std::size_t>(ci) * n;
        T mean, var;
        if (train) {
            T s = 0;
            for (int i = 0; i < n; ++i) s += xc[i];
            mean = s / n;
            T sq = 0;
            for (int i = 0; i < n; ++i) sq += (xc[i] - mean) * (xc[i] - mean);
            var = sq / n; // population variance
            running_mean[ci] = (T(1) - T(kBnMomentum)) * running_mean[ci] + T(kBnMomentum) * mean;
            running_var[ci] = (T(1) - T(kBnMomentum)) * running_var[ci] + T(kBnMomentum) * var;
        } else {
            mean = running_mean[ci];
            var = running_var[ci];
        }
        const T invstd = T(1) / std::sqrt(var + T(kBnEps));
        for (int i = 0; i < n; ++i) {
            const T xh = (xc[i] - mean) * invstd;
            yc[i] = gamma[ci] * xh + beta[ci];
            if (train && cache) cache->xhat[static_cast<std::size_t>(ci) * n + i] = xh;
        }
        if (train && cache) cache->invstd[ci] = invstd;
    }
    return y;
}

template <typename T>
Tensor<T> batchnorm2d_bwd(const Tensor<T>& gy, const Tensor<T>& gamma, const BNCache<T>& cache,
                          Tensor<T>& ggamma, Tensor<T>& gbeta) {
    const int c = gy.dim(0), h = gy.dim(1), w = gy.dim(2);
    const int n = h * w;
    Tensor<T> gx({c, h, w});
    for (int ci = 0; ci < c; ++ci) {
        const T* g = gy.data() + static_cast<std::size_t>(ci) * n;
        const T* xh = cache.xhat.data() + static_cast<std::size_t>(ci) * n;
        T* out = gx.data() + static_cast<std::size_t>(ci) * n;
        T sum_g = 0, sum_gx = 0;
        for (int i = 0; i < n; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
        }
        ggamma[ci] += sum_gx;
        gbeta[ci] += sum_g;
        const T coef = gamma[ci] * cache.invstd[ci] / T(n);
        for (int i = 0; i < n; ++i) out[i] = coef * (T(n) * g[i] - sum_g - xh[i] * sum_gx);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// dense / elementwise

template <typename T>
Tensor<T> linear_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int out = w.dim(0), in = w.dim(1);
    if (static_cast<int>(x.numel()) != in) throw ShapeError("linear: input extent mismatch");
    Tensor<T> y({out});
    for (int i = 0; i < out; ++i) {
        T s = b.empty() ? T(0) : b[static_cast<std::size_t>(i)];
        const T* row = w.data() + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) s += row[j] * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

template <typename T>
Tensor<T> linear_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>& gw,
                     Tensor<T>& gb) {
    const int out = w.dim(0), in = w.dim(1);
    Tensor<T> gx(x.shape());
    for (int i = 0; i < out; ++i) {
        const T g = gy[static_cast<std::size_t>(i)];
        const T* row = w.data() + static_cast<std::size_t>(i) * in;
        T* grow = gw.data() + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) {
            grow[j] += g * x[static_cast<std::size_t>(j)];
            gx[static_cast<std::size_t>(j)] += g * row[j];
        }
        if (!gb.empty()) gb[static_cast<std::size_t>(i)] += g;
    }
    return gx;
}

template <typename T>
Tensor<T> relu_fwd(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

// Subgradient 0 at exactly 0.
template <typename T>
Tensor<T> relu_bwd(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
    return gx;
}

template <typename T>
Tensor<T> sigmoid_fwd(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y;
}

template <typename T>
Tensor<T> sigmoid_bwd(const Tensor<T>& y, const Tensor<T>& gy) {
    Tensor<T> gx(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) gx[i] = gy[i] * y[i] * (T(1) - y[i]);
    return gx;
}

// ---------------------------------------------------------------------------
// LSTM cell, gate order (input, forget, candidate, output) packed on axis 0

template <typename T>
struct LstmCache {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> i, f, g, o, c, tanh_c;
};

template <typename T>
struct LstmGrads {
    Tensor<T> gx, gh_prev, gc_prev;
};

template <typename T>
void lstm_cell_fwd(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                   const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& bx,
                   const Tensor<T>& bh, Tensor<T>& h, Tensor<T>& c, LstmCache<T>& cache) {
    const int hid = h_prev.dim(0);
    if (wx.dim(0) != 4 * hid || wh.dim(0) != 4 * hid) throw ShapeError("lstm: packed gate axis mismatch");
    Tensor<T> a = linear_fwd(x, wx, bx);
    Tensor<T> ah = linear_fwd(h_prev, wh, bh);
    a.add_(ah);
    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.i = Tensor<T>({hid});
    cache.f = Tensor<T>({hid});
    cache.g = Tensor<T>({hid});
    cache.o = Tensor<T>({hid});
    h = Tensor<T>({hid});
    c = Tensor<T>({hid});
    for (int j = 0; j < hid; ++j) {
        const T ai = a[static_cast<std::size_t>(j)];
        const T af = a[static_cast<std::size_t>(hid + j)];
        const T ag = a[static_cast<std::size_t>(2 * hid + j)];
        const T ao = a[static_cast<std::size_t>(3 * hid + j)];
        const T gi = T(1) / (T(1) + std::exp(-ai));
        const T gf = T(1) / (T(1) + std::exp(-af));
        const T gg = std::tanh(ag);
        const T go = T(1) / (T(1) + std::exp(-ao));
        const T cj = gf * c_prev[static_cast<std::size_t>(j)] + gi * gg;
        cache.i[static_cast<std::size_t>(j)] = gi;
        cache.f[static_cast<std::size_t>(j)] = gf;
        cache.g[static_cast<std::size_t>(j)] = gg;
        cache.o[static_cast<std::size_t>(j)] = go;
        c[static_cast<std::size_t>(j)] = cj;
        h[static_cast<std::size_t>(j)] = go * std::tanh(cj);
    }
    cache.c = c;
    cache.tanh_c = Tensor<T>({hid});
    for (int j = 0; j < hid; ++j) cache.tanh_c[static_cast<std::size_t>(j)] = std::tanh(c[static_cast<std::size_t>(j)]);
}

template <typename T>
LstmGrads<T> lstm_cell_bwd(const LstmCache<T>& cache, const Tensor<T>& wx, const Tensor<T>& wh,
                           const Tensor<T>& gh, const Tensor<T>& gc_in, Tensor<T>& gwx,
                           Tensor<T>& gwh, Tensor<T>& gbx, Tensor<T>& gbh) {
    const int hid = cache.h_prev.dim(0);
    Tensor<T> da({4 * hid});
    LstmGrads<T> out;
    out.gc_prev = Tensor<T>({hid});
    for (int j = 0; j < hid; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        const T tc = cache.tanh_c[sj];
        const T go = cache.o[sj];
        const T dout = gh[sj] * tc;
        const T dc = gc_in[sj] + gh[sj] * go * (T(1) - tc * tc);
        const T di = dc * cache.g[sj];
        const T df = dc * cache.c_prev[sj];
        const T dg = dc * cache.i[sj];
        out.gc_prev[sj] = dc * cache.f[sj];
        da[sj] = di * cache.i[sj] * (T(1) - cache.i[sj]);
        da[static_cast<std::size_t>(hid) + sj] = df * cache.f[sj] * (T(1) - cache.f[sj]);
        da[static_cast<std::size_t>(2 * hid) + sj] = dg * (T(1) - cache.g[sj] * cache.g[sj]);
        da[static_cast<std::size_t>(3 * hid) + sj] = dout * go * (T(1) - go);
    }
    out.gx = linear_bwd(cache.x, wx, da, gwx, gbx);
    out.gh_prev = linear_bwd(cache.h_prev, wh, da, gwh, gbh);
    return out;
}

// ---------------------------------------------------------------------------
// ConvLSTM cell: same gate algebra with 3x3 shape-preserving convolutions.
// Single bias vector per packed gate stack.

template <typename T>
struct ConvLstmCache {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> i, f, g, o, c, tanh_c;
};

template <typename T>
struct ConvLstmGrads {
    Tensor<T> gx, gh_prev, gc_prev;
};

template <typename T>
void convlstm_cell_fwd(const Tensor<T>& x, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                       const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& b, Tensor<T>& h,
                       Tensor<T>& c, ConvLstmCache<T>& cache) {
    if (x.dim(1) != h_prev.dim(1) || x.dim(2) != h_prev.dim(2))
        throw ShapeError("convlstm: spatial extents of input and hidden state differ");
    const int hid = h_prev.dim(0);
    const int hh = h_prev.dim(1), ww = h_prev.dim(2);
    const int pad = wx.dim(2) / 2;
    Tensor<T> a = conv2d_fwd(x, wx, b, 1, pad);
    Tensor<T> empty_b;
    Tensor<T> ah = conv2d_fwd(h_prev, wh, empty_b, 1, pad);
    a.add_(ah);

    const std::size_t plane = static_cast<std::size_t>(hh) * ww;
    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.i = Tensor<T>({hid, hh, ww});
    cache.f = Tensor<T>({hid, hh, ww});
    cache.g = Tensor<T>({hid, hh, ww});
    cache.o = Tensor<T>({hid, hh, ww});
    h = Tensor<T>({hid, hh, ww});
    c = Tensor<T>({hid, hh, ww});
    for (std::size_t j = 0; j < static_cast<std::size_t>(hid) * plane; ++j) {
        const T gi = T(1) / (T(1) + std::exp(-a[j]));
        const T gf = T(1) / (T(1) + std::exp(-a[static_cast<std::size_t>(hid) * plane + j]));
        const T gg = std::tanh(a[2 * static_cast<std::size_t>(hid) * plane + j]);
        const T go = T(1) / (T(1) + std::exp(-a[3 * static_cast<std::size_t>(hid) * plane + j]));
        const T cj = gf * c_prev[j] + gi * gg;
        cache.i[j] = gi;
        cache.f[j] = gf;
        cache.g[j] = gg;
        cache.o[j] = go;
        c[j] = cj;
        h[j] = go * std::tanh(cj);
    }
    cache.c = c;
    cache.tanh_c = Tensor<T>({hid, hh, ww});
    for (std::size_t j = 0; j < c.numel(); ++j) cache.tanh_c[j] = std::tanh(c[j]);
}

template <typename T>
ConvLstmGrads<T> convlstm_cell_bwd(const ConvLstmCache<T>& cache, const Tensor<T>& wx,
                                   const Tensor<T>& wh, const Tensor<T>& gh, const Tensor<T>& gc_in,
                                   Tensor<T>& gwx, Tensor<T>& gwh, Tensor<T>& gb) {
    const int hid = cache.h_prev.dim(0);
    const int hh = cache.h_prev.dim(1), ww = cache.h_prev.dim(2);
    const std::size_t plane = static_cast<std::size_t>(hh) * ww;
    const int pad = wx.dim(2) / 2;
    Tensor<T> da({4 * hid, hh, ww});
    ConvLstmGrads<T> out;
    out.gc_prev = Tensor<T>({hid, hh, ww});
    for (std::size_t j = 0; j < static_cast<std::size_t>(hid) * plane; ++j) {
        const T tc = cache.tanh_c[j];
        const T go = cache.o[j];
        const T dout = gh[j] * tc;
        const T dc = gc_in[j] + gh[j] * go * (T(1) - tc * tc);
        const T di = dc * cache.g[j];
        const T df = dc * cache.c_prev[j];
        const T dg = dc * cache.i[j];
        out.gc_prev[j] = dc * cache.f[j];
        da[j] = di * cache.i[j] * (T(1) - cache.i[j]);
        da[static_cast<std::size_t>(hid) * plane + j] = df * cache.f[j] * (T(1) - cache.f[j]);
        da[2 * static_cast<std::size_t>(hid) * plane + j] = dg * (T(1) - cache.g[j] * cache.g[j]);
        da[3 * static_cast<std::size_t>(hid) * plane + j] = dout * go * (T(1) - go);
    }
    Tensor<T> gb_none;
    out.gx = conv2d_bwd(cache.x, wx, da, 1, pad, gwx, gb);
    out.gh_prev = conv2d_bwd(cache.h_prev, wh, da, 1, pad, gwh, gb_none);
    return out;
}

// ---------------------------------------------------------------------------
// BCE loss (mean over all elements), predictions clamped to [eps, 1-eps]

constexpr double kBceEps = 1e-7;

template <typename T>
T bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.numel() == 0) throw ShapeError("bce_loss: empty prediction");
    if (pred.numel() != target.numel()) throw ShapeError("bce_loss: size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double p = std::min(std::max(static_cast<double>(pred[i]), kBceEps), 1.0 - kBceEps);
        const double t = target[i];
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return static_cast<T>(acc / static_cast<double>(pred.numel()));
}

template <typename T>
Tensor<T> bce_grad(const Tensor<T>& pred, const Tensor<T>& target) {
    Tensor<T> g(pred.shape());
    const double n = static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double p = std::min(std::max(static_cast<double>(pred[i]), kBceEps), 1.0 - kBceEps);
        const double t = target[i];
        g[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
    }
    return g;
}

// ---------------------------------------------------------------------------
// 2x nearest-neighbor upsample and center crop/pad (decoder plumbing)

template <typename T>
Tensor<T> upsample2x_fwd(const Tensor<T>& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<T> y({c, 2 * h, 2 * w});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) y.at(ci, i, j) = x.at(ci, i / 2, j / 2);
    return y;
}

template <typename T>
Tensor<T> upsample2x_bwd(const Tensor<T>& gy) {
    const int c = gy.dim(0), h = gy.dim(1) / 2, w = gy.dim(2) / 2;
    Tensor<T> gx({c, h, w});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) gx.at(ci, i / 2, j / 2) += gy.at(ci, i, j);
    return gx;
}

// Fits a C x S x S map to C x H x W: center crop when larger, zero pad when smaller.
template <typename T>
Tensor<T> center_fit_fwd(const Tensor<T>& x, int th, int tw) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<T> y({c, th, tw});
    const int oi = (h - th) / 2, oj = (w - tw) / 2; // may be negative (pad)
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < th; ++i)
            for (int j = 0; j < tw; ++j) {
                const int si = i + oi, sj = j + oj;
                y.at(ci, i, j) =
                    (si >= 0 && si < h && sj >= 0 && sj < w) ? x.at(ci, si, sj) : T(0);
            }
    return y;
}

template <typename T>
Tensor<T> center_fit_bwd(const Tensor<T>& gy, int sh, int sw) {
    const int c = gy.dim(0), th = gy.dim(1), tw = gy.dim(2);
    Tensor<T> gx({c, sh, sw});
    const int oi = (sh - th) / 2, oj = (sw - tw) / 2;
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < th; ++i)
            for (int j = 0; j < tw; ++j) {
                const int si = i + oi, sj = j + oj;
                if (si >= 0 && si < sh && sj >= 0 && sj < sw) gx.at(ci, si, sj) += gy.at(ci, i, j);
            }
    return gx;
}

} // namespace firecast
