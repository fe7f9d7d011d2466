#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "foct/tensor.hpp"

// Compute kernels behind the layer stack. Every kernel exists twice:
//   kernels::serial — plain scalar loops, the reference used by tests
//   kernels::omp    — OpenMP-parallel + simd variant used in production
// Dispatch is runtime-switchable so layers never care which one runs.
// Parallelization is always over disjoint output slices, so results do not
// depend on the thread count; omp and serial may differ in the last ulp
// where simd reductions reorder sums.

namespace foct::kernels {

bool& parallel_flag();
inline bool parallel_enabled() { return parallel_flag(); }
inline void set_parallel(bool on) { parallel_flag() = on; }

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv2d. Weights are (oc, ic, k, k), bias (oc).
// ---------------------------------------------------------------------------

namespace serial {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b,
                    Tensor<T>& y, int stride, int pad) {
    const int k = w.h;
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < w.n; ++oc) {
            T* yp = y.channel(in, oc);
            const std::size_t plane = static_cast<std::size_t>(y.h) * y.w;
            for (std::size_t i = 0; i < plane; ++i) yp[i] = b[oc];
            for (int ic = 0; ic < x.c; ++ic) {
                const T* xp = x.channel(in, ic);
                for (int oh = 0; oh < y.h; ++oh)
                    for (int ow = 0; ow < y.w; ++ow) {
                        T acc = 0;
                        for (int kh = 0; kh < k; ++kh) {
                            const int ih = oh * stride + kh - pad;
                            if (ih < 0 || ih >= x.h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = ow * stride + kw - pad;
                                if (iw < 0 || iw >= x.w) continue;
                                acc += w.at(oc, ic, kh, kw) * xp[ih * x.w + iw];
                            }
                        }
                        yp[oh * y.w + ow] += acc;
                    }
            }
        }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, Tensor<T>& dx,
                           int stride, int pad) {
    const int k = w.h;
    dx.fill(T(0));
    for (int in = 0; in < dx.n; ++in)
        for (int ic = 0; ic < dx.c; ++ic) {
            T* dxp = dx.channel(in, ic);
            for (int oc = 0; oc < w.n; ++oc) {
                const T* dyp = dy.channel(in, oc);
                for (int oh = 0; oh < dy.h; ++oh)
                    for (int ow = 0; ow < dy.w; ++ow) {
                        const T g = dyp[oh * dy.w + ow];
                        for (int kh = 0; kh < k; ++kh) {
                            const int ih = oh * stride + kh - pad;
                            if (ih < 0 || ih >= dx.h) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int iw = ow * stride + kw - pad;
                                if (iw < 0 || iw >= dx.w) continue;
                                dxp[ih * dx.w + iw] += w.at(oc, ic, kh, kw) * g;
                            }
                        }
                    }
            }
        }
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dw,
                            std::vector<T>& db, int stride, int pad) {
    const int k = dw.h;
    for (int oc = 0; oc < dw.n; ++oc) {
        T bacc = 0;
        for (int in = 0; in < dy.n; ++in) {
            const T* dyp = dy.channel(in, oc);
            const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
            for (std::size_t i = 0; i < plane; ++i) bacc += dyp[i];
        }
        db[oc] += bacc;
        for (int ic = 0; ic < x.c; ++ic)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                    T acc = 0;
                    for (int in = 0; in < dy.n; ++in) {
                        const T* dyp = dy.channel(in, oc);
                        const T* xp = x.channel(in, ic);
                        for (int oh = 0; oh < dy.h; ++oh) {
                            const int ih = oh * stride + kh - pad;
                            if (ih < 0 || ih >= x.h) continue;
                            for (int ow = 0; ow < dy.w; ++ow) {
                                const int iw = ow * stride + kw - pad;
                                if (iw < 0 || iw >= x.w) continue;
                                acc += dyp[oh * dy.w + ow] * xp[ih * x.w + iw];
                            }
                        }
                    }
                    dw.at(oc, ic, kh, kw) += acc;
                }
    }
}

}  // namespace serial

namespace omp {

// The parallel conv kernels lower each sample to a (C*k*k) x (OH*OW) patch
// matrix first. Every inner loop then runs over a full output plane with unit
// stride, which vectorizes well even on the deep stages where a row is only
// 4-8 pixels wide.
namespace detail {

// Patch-matrix scratch, reused across calls so the multi-MB buffer for the
// full-resolution stages is allocated once per thread.
template <typename T>
std::vector<T>& conv_cols_buffer() {
    thread_local std::vector<T> buf;
    return buf;
}

// Writes the k*k patch rows of one input channel: rows[(kh*k+kw)][oh*ow_n+ow]
// = x[oh*stride+kh-pad][ow*stride+kw-pad], zero outside the image.
template <typename T>
void im2col_channel(const T* xp, int xh, int xw, int k, int stride, int pad,
                    int oh_n, int ow_n, T* rows) {
    const std::size_t plane = static_cast<std::size_t>(oh_n) * ow_n;
    for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
            T* dst = rows + (static_cast<std::size_t>(kh) * k + kw) * plane;
            for (int oh = 0; oh < oh_n; ++oh) {
                const int ih = oh * stride + kh - pad;
                T* drow = dst + static_cast<std::size_t>(oh) * ow_n;
                if (ih < 0 || ih >= xh) {
                    std::fill(drow, drow + ow_n, T(0));
                    continue;
                }
                const T* xrow = xp + static_cast<std::size_t>(ih) * xw;
                if (stride == 1) {
                    const int off = kw - pad;
                    const int lo = off < 0 ? -off : 0;
                    const int hi = std::min(ow_n, xw - off);
                    std::fill(drow, drow + lo, T(0));
                    std::copy(xrow + lo + off, xrow + hi + off, drow + lo);
                    std::fill(drow + hi, drow + ow_n, T(0));
                } else {
                    for (int ow = 0; ow < ow_n; ++ow) {
                        const int iw = ow * stride + kw - pad;
                        drow[ow] = (iw >= 0 && iw < xw) ? xrow[iw] : T(0);
                    }
                }
            }
        }
}

// Scatter-adds patch rows back into one input-gradient channel (the adjoint
// of im2col_channel).
template <typename T>
void col2im_channel_add(const T* rows, int k, int stride, int pad, int oh_n,
                        int ow_n, T* dxp, int xh, int xw) {
    const std::size_t plane = static_cast<std::size_t>(oh_n) * ow_n;
    for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
            const T* src = rows + (static_cast<std::size_t>(kh) * k + kw) * plane;
            for (int oh = 0; oh < oh_n; ++oh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= xh) continue;
                T* dxrow = dxp + static_cast<std::size_t>(ih) * xw;
                const T* srow = src + static_cast<std::size_t>(oh) * ow_n;
                if (stride == 1) {
                    const int off = kw - pad;
                    const int lo = off < 0 ? -off : 0;
                    const int hi = std::min(ow_n, xw - off);
#pragma omp simd
                    for (int ow = lo; ow < hi; ++ow) dxrow[ow + off] += srow[ow];
                } else {
                    for (int ow = 0; ow < ow_n; ++ow) {
                        const int iw = ow * stride + kw - pad;
                        if (iw >= 0 && iw < xw) dxrow[iw] += srow[ow];
                    }
                }
            }
        }
}

}  // namespace detail

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b,
                    Tensor<T>& y, int stride, int pad) {
    const int k = w.h;
    const int N = x.n, OC = w.n, IC = x.c;
    const std::size_t P = static_cast<std::size_t>(y.h) * y.w;
    const std::size_t KK = static_cast<std::size_t>(k) * k;
    const std::size_t Q = static_cast<std::size_t>(IC) * KK;
    auto& cols = detail::conv_cols_buffer<T>();
    cols.resize(static_cast<std::size_t>(N) * Q * P);
    T* cp = cols.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int ic = 0; ic < IC; ++ic)
            detail::im2col_channel(x.channel(in, ic), x.h, x.w, k, stride, pad, y.h,
                                   y.w, cp + (static_cast<std::size_t>(in) * IC + ic) * KK * P);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int oc = 0; oc < OC; ++oc) {
            T* yp = y.channel(in, oc);
            const T* wrow = w.channel(oc, 0);  // (ic, kh, kw) flattened, Q long
            const T* cn = cp + static_cast<std::size_t>(in) * Q * P;
            const T bias = b[oc];
            for (std::size_t i = 0; i < P; ++i) yp[i] = bias;
            std::size_t q = 0;
            for (; q + 4 <= Q; q += 4) {
                const T w0 = wrow[q], w1 = wrow[q + 1], w2 = wrow[q + 2], w3 = wrow[q + 3];
                const T* c0 = cn + q * P;
                const T* c1 = c0 + P;
                const T* c2 = c1 + P;
                const T* c3 = c2 + P;
#pragma omp simd
                for (std::size_t i = 0; i < P; ++i)
                    yp[i] += w0 * c0[i] + w1 * c1[i] + w2 * c2[i] + w3 * c3[i];
            }
            for (; q < Q; ++q) {
                const T wv = wrow[q];
                const T* crow = cn + q * P;
#pragma omp simd
                for (std::size_t i = 0; i < P; ++i) yp[i] += wv * crow[i];
            }
        }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, Tensor<T>& dx,
                           int stride, int pad) {
    const int k = w.h;
    const int N = dx.n, IC = dx.c, OC = w.n;
    const std::size_t P = static_cast<std::size_t>(dy.h) * dy.w;
    const std::size_t KK = static_cast<std::size_t>(k) * k;
    const std::size_t Q = static_cast<std::size_t>(IC) * KK;
    auto& cols = detail::conv_cols_buffer<T>();
    cols.resize(static_cast<std::size_t>(N) * Q * P);
    T* cp = cols.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int ic = 0; ic < IC; ++ic) {
            // Patch-row gradients for this channel: rows = W(:, ic)^T * dy.
            T* rows = cp + (static_cast<std::size_t>(in) * IC + ic) * KK * P;
            const T* wbase = w.channel(0, ic);
            const T* dybase = dy.channel(in, 0);
            for (std::size_t t = 0; t < KK; ++t) {
                T* drow = rows + t * P;
                std::fill(drow, drow + P, T(0));
                int oc = 0;
                for (; oc + 4 <= OC; oc += 4) {
                    const T w0 = wbase[static_cast<std::size_t>(oc) * Q + t];
                    const T w1 = wbase[static_cast<std::size_t>(oc + 1) * Q + t];
                    const T w2 = wbase[static_cast<std::size_t>(oc + 2) * Q + t];
                    const T w3 = wbase[static_cast<std::size_t>(oc + 3) * Q + t];
                    const T* d0 = dybase + static_cast<std::size_t>(oc) * P;
                    const T* d1 = d0 + P;
                    const T* d2 = d1 + P;
                    const T* d3 = d2 + P;
#pragma omp simd
                    for (std::size_t i = 0; i < P; ++i)
                        drow[i] += w0 * d0[i] + w1 * d1[i] + w2 * d2[i] + w3 * d3[i];
                }
                for (; oc < OC; ++oc) {
                    const T wv = wbase[static_cast<std::size_t>(oc) * Q + t];
                    const T* dyp = dybase + static_cast<std::size_t>(oc) * P;
#pragma omp simd
                    for (std::size_t i = 0; i < P; ++i) drow[i] += wv * dyp[i];
                }
            }
            T* dxp = dx.channel(in, ic);
            const std::size_t xplane = static_cast<std::size_t>(dx.h) * dx.w;
            std::fill(dxp, dxp + xplane, T(0));
            detail::col2im_channel_add(rows, k, stride, pad, dy.h, dy.w, dxp, dx.h, dx.w);
        }
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dw,
                            std::vector<T>& db, int stride, int pad) {
    const int k = dw.h;
    const int N = x.n, OC = dw.n, IC = x.c;
    const std::size_t P = static_cast<std::size_t>(dy.h) * dy.w;
    const std::size_t KK = static_cast<std::size_t>(k) * k;
    const std::size_t Q = static_cast<std::size_t>(IC) * KK;
    auto& cols = detail::conv_cols_buffer<T>();
    cols.resize(static_cast<std::size_t>(N) * Q * P);
    T* cp = cols.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int ic = 0; ic < IC; ++ic)
            detail::im2col_channel(x.channel(in, ic), x.h, x.w, k, stride, pad, dy.h,
                                   dy.w, cp + (static_cast<std::size_t>(in) * IC + ic) * KK * P);
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        T bacc = 0;
        for (int in = 0; in < N; ++in) {
            const T* dyp = dy.channel(in, oc);
#pragma omp simd reduction(+ : bacc)
            for (std::size_t i = 0; i < P; ++i) bacc += dyp[i];
        }
        db[oc] += bacc;
        T* dwrow = dw.channel(oc, 0);  // (ic, kh, kw) flattened, Q long
        std::size_t q = 0;
        for (; q + 4 <= Q; q += 4) {
            T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
            for (int in = 0; in < N; ++in) {
                const T* dyp = dy.channel(in, oc);
                const T* c0 = cp + (static_cast<std::size_t>(in) * Q + q) * P;
                const T* c1 = c0 + P;
                const T* c2 = c1 + P;
                const T* c3 = c2 + P;
#pragma omp simd reduction(+ : a0, a1, a2, a3)
                for (std::size_t i = 0; i < P; ++i) {
                    const T d = dyp[i];
                    a0 += d * c0[i];
                    a1 += d * c1[i];
                    a2 += d * c2[i];
                    a3 += d * c3[i];
                }
            }
            dwrow[q] += a0;
            dwrow[q + 1] += a1;
            dwrow[q + 2] += a2;
            dwrow[q + 3] += a3;
        }
        for (; q < Q; ++q) {
            T acc = 0;
            for (int in = 0; in < N; ++in) {
                const T* dyp = dy.channel(in, oc);
                const T* crow = cp + (static_cast<std::size_t>(in) * Q + q) * P;
#pragma omp simd reduction(+ : acc)
                for (std::size_t i = 0; i < P; ++i) acc += dyp[i] * crow[i];
            }
            dwrow[q] += acc;
        }
    }
}

}  // namespace omp

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b,
                    Tensor<T>& y, int stride, int pad) {
    if (parallel_enabled())
        omp::conv2d_forward(x, w, b, y, stride, pad);
    else
        serial::conv2d_forward(x, w, b, y, stride, pad);
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& dy, const Tensor<T>& w, Tensor<T>& dx,
                           int stride, int pad) {
    if (parallel_enabled())
        omp::conv2d_backward_input(dy, w, dx, stride, pad);
    else
        serial::conv2d_backward_input(dy, w, dx, stride, pad);
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dw,
                            std::vector<T>& db, int stride, int pad) {
    if (parallel_enabled())
        omp::conv2d_backward_params(x, dy, dw, db, stride, pad);
    else
        serial::conv2d_backward_params(x, dy, dw, db, stride, pad);
}

// ---------------------------------------------------------------------------
// group norm. Statistics are per (sample, group); gamma/beta per channel.
// ---------------------------------------------------------------------------

namespace serial {

template <typename T>
void group_norm_forward(const Tensor<T>& x, const std::vector<T>& gamma,
                        const std::vector<T>& beta, int groups, T eps, Tensor<T>& y,
                        std::vector<T>& mean, std::vector<T>& rstd) {
    const int cpg = x.c / groups;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t m = cpg * plane;
    mean.assign(static_cast<std::size_t>(x.n) * groups, T(0));
    rstd.assign(static_cast<std::size_t>(x.n) * groups, T(0));
    for (int in = 0; in < x.n; ++in)
        for (int g = 0; g < groups; ++g) {
            const T* xp = x.channel(in, g * cpg);
            T mu = 0;
            for (std::size_t i = 0; i < m; ++i) mu += xp[i];
            mu /= static_cast<T>(m);
            T var = 0;
            for (std::size_t i = 0; i < m; ++i) {
                const T d = xp[i] - mu;
                var += d * d;
            }
            var /= static_cast<T>(m);
            const T rs = T(1) / std::sqrt(var + eps);
            mean[in * groups + g] = mu;
            rstd[in * groups + g] = rs;
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                T* yc = y.channel(in, ch);
                const T ga = gamma[ch], be = beta[ch];
                for (std::size_t i = 0; i < plane; ++i)
                    yc[i] = ga * (xc[i] - mu) * rs + be;
            }
        }
}

template <typename T>
void group_norm_backward(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& gamma,
                         int groups, const std::vector<T>& mean, const std::vector<T>& rstd,
                         Tensor<T>& dx, std::vector<T>& dgamma, std::vector<T>& dbeta) {
    const int cpg = x.c / groups;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t m = cpg * plane;
    for (int in = 0; in < x.n; ++in)
        for (int g = 0; g < groups; ++g) {
            const T mu = mean[in * groups + g];
            const T rs = rstd[in * groups + g];
            T s1 = 0, s2 = 0;  // sum(dy*gamma), sum(dy*gamma*xhat)
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                const T* dyc = dy.channel(in, ch);
                const T ga = gamma[ch];
                for (std::size_t i = 0; i < plane; ++i) {
                    const T xh = (xc[i] - mu) * rs;
                    s1 += dyc[i] * ga;
                    s2 += dyc[i] * ga * xh;
                }
            }
            s1 /= static_cast<T>(m);
            s2 /= static_cast<T>(m);
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                const T* dyc = dy.channel(in, ch);
                T* dxc = dx.channel(in, ch);
                const T ga = gamma[ch];
                for (std::size_t i = 0; i < plane; ++i) {
                    const T xh = (xc[i] - mu) * rs;
                    dxc[i] = rs * (dyc[i] * ga - s1 - xh * s2);
                }
            }
        }
    for (int ch = 0; ch < x.c; ++ch) {
        const int g = ch / cpg;
        T dg = 0, dbv = 0;
        for (int in = 0; in < x.n; ++in) {
            const T mu = mean[in * groups + g];
            const T rs = rstd[in * groups + g];
            const T* xc = x.channel(in, ch);
            const T* dyc = dy.channel(in, ch);
            for (std::size_t i = 0; i < plane; ++i) {
                dg += dyc[i] * (xc[i] - mu) * rs;
                dbv += dyc[i];
            }
        }
        dgamma[ch] += dg;
        dbeta[ch] += dbv;
    }
}

}  // namespace serial

namespace omp {

template <typename T>
void group_norm_forward(const Tensor<T>& x, const std::vector<T>& gamma,
                        const std::vector<T>& beta, int groups, T eps, Tensor<T>& y,
                        std::vector<T>& mean, std::vector<T>& rstd) {
    const int cpg = x.c / groups;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t m = cpg * plane;
    mean.assign(static_cast<std::size_t>(x.n) * groups, T(0));
    rstd.assign(static_cast<std::size_t>(x.n) * groups, T(0));
    const int N = x.n;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int g = 0; g < groups; ++g) {
            const T* xp = x.channel(in, g * cpg);
            T mu = 0;
#pragma omp simd reduction(+ : mu)
            for (std::size_t i = 0; i < m; ++i) mu += xp[i];
            mu /= static_cast<T>(m);
            T var = 0;
#pragma omp simd reduction(+ : var)
            for (std::size_t i = 0; i < m; ++i) {
                const T d = xp[i] - mu;
                var += d * d;
            }
            var /= static_cast<T>(m);
            const T rs = T(1) / std::sqrt(var + eps);
            mean[in * groups + g] = mu;
            rstd[in * groups + g] = rs;
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                T* yc = y.channel(in, ch);
                const T scale = gamma[ch] * rs;
                const T shift = beta[ch] - scale * mu;
#pragma omp simd
                for (std::size_t i = 0; i < plane; ++i) yc[i] = scale * xc[i] + shift;
            }
        }
}

template <typename T>
void group_norm_backward(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& gamma,
                         int groups, const std::vector<T>& mean, const std::vector<T>& rstd,
                         Tensor<T>& dx, std::vector<T>& dgamma, std::vector<T>& dbeta) {
    const int cpg = x.c / groups;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t m = cpg * plane;
    const int N = x.n;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < N; ++in)
        for (int g = 0; g < groups; ++g) {
            const T mu = mean[in * groups + g];
            const T rs = rstd[in * groups + g];
            T s1 = 0, s2 = 0;
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                const T* dyc = dy.channel(in, ch);
                const T ga = gamma[ch];
                T a = 0, bsum = 0;
#pragma omp simd reduction(+ : a, bsum)
                for (std::size_t i = 0; i < plane; ++i) {
                    const T xh = (xc[i] - mu) * rs;
                    a += dyc[i];
                    bsum += dyc[i] * xh;
                }
                s1 += a * ga;
                s2 += bsum * ga;
            }
            s1 /= static_cast<T>(m);
            s2 /= static_cast<T>(m);
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const T* xc = x.channel(in, ch);
                const T* dyc = dy.channel(in, ch);
                T* dxc = dx.channel(in, ch);
                const T ga = gamma[ch];
#pragma omp simd
                for (std::size_t i = 0; i < plane; ++i) {
                    const T xh = (xc[i] - mu) * rs;
                    dxc[i] = rs * (dyc[i] * ga - s1 - xh * s2);
                }
            }
        }
    const int C = x.c;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < C; ++ch) {
        const int g = ch / cpg;
        T dg = 0, dbv = 0;
        for (int in = 0; in < x.n; ++in) {
            const T mu = mean[in * groups + g];
            const T rs = rstd[in * groups + g];
            const T* xc = x.channel(in, ch);
            const T* dyc = dy.channel(in, ch);
#pragma omp simd reduction(+ : dg, dbv)
            for (std::size_t i = 0; i < plane; ++i) {
                dg += dyc[i] * (xc[i] - mu) * rs;
                dbv += dyc[i];
            }
        }
        dgamma[ch] += dg;
        dbeta[ch] += dbv;
    }
}

}  // namespace omp

template <typename T>
void group_norm_forward(const Tensor<T>& x, const std::vector<T>& gamma,
                        const std::vector<T>& beta, int groups, T eps, Tensor<T>& y,
                        std::vector<T>& mean, std::vector<T>& rstd) {
    if (parallel_enabled())
        omp::group_norm_forward(x, gamma, beta, groups, eps, y, mean, rstd);
    else
        serial::group_norm_forward(x, gamma, beta, groups, eps, y, mean, rstd);
}

template <typename T>
void group_norm_backward(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& gamma,
                         int groups, const std::vector<T>& mean, const std::vector<T>& rstd,
                         Tensor<T>& dx, std::vector<T>& dgamma, std::vector<T>& dbeta) {
    if (parallel_enabled())
        omp::group_norm_backward(x, dy, gamma, groups, mean, rstd, dx, dgamma, dbeta);
    else
        serial::group_norm_backward(x, dy, gamma, groups, mean, rstd, dx, dgamma, dbeta);
}

// ---------------------------------------------------------------------------
// elementwise / resampling
// ---------------------------------------------------------------------------

namespace serial {

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
}

// dx from dy using the forward output y (y > 0 <=> pass-through).
template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    for (std::size_t i = 0; i < y.size(); ++i)
        dx.data[i] = y.data[i] > T(0) ? dy.data[i] : T(0);
}

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.channel(in, ic);
            T* yp = y.channel(in, ic);
            for (int ih = 0; ih < x.h; ++ih)
                for (int iw = 0; iw < x.w; ++iw) {
                    const T v = xp[ih * x.w + iw];
                    T* row0 = yp + (2 * ih) * y.w + 2 * iw;
                    T* row1 = row0 + y.w;
                    row0[0] = v;
                    row0[1] = v;
                    row1[0] = v;
                    row1[1] = v;
                }
        }
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    for (int in = 0; in < dx.n; ++in)
        for (int ic = 0; ic < dx.c; ++ic) {
            const T* dyp = dy.channel(in, ic);
            T* dxp = dx.channel(in, ic);
            for (int ih = 0; ih < dx.h; ++ih)
                for (int iw = 0; iw < dx.w; ++iw) {
                    const T* row0 = dyp + (2 * ih) * dy.w + 2 * iw;
                    const T* row1 = row0 + dy.w;
                    dxp[ih * dx.w + iw] = row0[0] + row0[1] + row1[0] + row1[1];
                }
        }
}

// Channel softmax per pixel.
template <typename T>
void softmax_forward(const Tensor<T>& logits, Tensor<T>& probs) {
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    for (int in = 0; in < logits.n; ++in)
        for (std::size_t i = 0; i < plane; ++i) {
            T mx = logits.channel(in, 0)[i];
            for (int ch = 1; ch < logits.c; ++ch)
                mx = std::max(mx, logits.channel(in, ch)[i]);
            T sum = 0;
            for (int ch = 0; ch < logits.c; ++ch) {
                const T e = std::exp(logits.channel(in, ch)[i] - mx);
                probs.channel(in, ch)[i] = e;
                sum += e;
            }
            for (int ch = 0; ch < logits.c; ++ch) probs.channel(in, ch)[i] /= sum;
        }
}

template <typename T>
void softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs, Tensor<T>& dlogits) {
    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    for (int in = 0; in < probs.n; ++in)
        for (std::size_t i = 0; i < plane; ++i) {
            T dot = 0;
            for (int ch = 0; ch < probs.c; ++ch)
                dot += dprobs.channel(in, ch)[i] * probs.channel(in, ch)[i];
            for (int ch = 0; ch < probs.c; ++ch)
                dlogits.channel(in, ch)[i] =
                    probs.channel(in, ch)[i] * (dprobs.channel(in, ch)[i] - dot);
        }
}

}  // namespace serial

namespace omp {

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    const std::size_t nelem = x.size();
    const T* xp = x.ptr();
    T* yp = y.ptr();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < nelem; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    const std::size_t nelem = y.size();
    const T* yp = y.ptr();
    const T* dyp = dy.ptr();
    T* dxp = dx.ptr();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < nelem; ++i) dxp[i] = yp[i] > T(0) ? dyp[i] : T(0);
}

template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
    const int NC = x.n * x.c;
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < NC; ++nc) {
        const T* xp = x.ptr() + static_cast<std::size_t>(nc) * x.h * x.w;
        T* yp = y.ptr() + static_cast<std::size_t>(nc) * y.h * y.w;
        for (int ih = 0; ih < x.h; ++ih) {
            const T* xrow = xp + static_cast<std::size_t>(ih) * x.w;
            T* row0 = yp + static_cast<std::size_t>(2 * ih) * y.w;
            T* row1 = row0 + y.w;
#pragma omp simd
            for (int iw = 0; iw < x.w; ++iw) {
                const T v = xrow[iw];
                row0[2 * iw] = v;
                row0[2 * iw + 1] = v;
                row1[2 * iw] = v;
                row1[2 * iw + 1] = v;
            }
        }
    }
}

template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    const int NC = dx.n * dx.c;
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < NC; ++nc) {
        const T* dyp = dy.ptr() + static_cast<std::size_t>(nc) * dy.h * dy.w;
        T* dxp = dx.ptr() + static_cast<std::size_t>(nc) * dx.h * dx.w;
        for (int ih = 0; ih < dx.h; ++ih) {
            const T* row0 = dyp + static_cast<std::size_t>(2 * ih) * dy.w;
            const T* row1 = row0 + dy.w;
            T* dxrow = dxp + static_cast<std::size_t>(ih) * dx.w;
#pragma omp simd
            for (int iw = 0; iw < dx.w; ++iw)
                dxrow[iw] = row0[2 * iw] + row0[2 * iw + 1] + row1[2 * iw] + row1[2 * iw + 1];
        }
    }
}

template <typename T>
void softmax_forward(const Tensor<T>& logits, Tensor<T>& probs) {
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    const int N = logits.n, C = logits.c;
#pragma omp parallel for schedule(static)
    for (int in = 0; in < N; ++in) {
        if (C == 2) {
            const T* l0 = logits.channel(in, 0);
            const T* l1 = logits.channel(in, 1);
            T* p0 = probs.channel(in, 0);
            T* p1 = probs.channel(in, 1);
            for (std::size_t i = 0; i < plane; ++i) {
                // p1 = sigmoid(l1 - l0)
                const T d = l1[i] - l0[i];
                const T e = std::exp(-std::abs(d));
                const T s = T(1) / (T(1) + e);
                p1[i] = d >= T(0) ? s : T(1) - s;
                p0[i] = T(1) - p1[i];
            }
        } else {
            for (std::size_t i = 0; i < plane; ++i) {
                T mx = logits.channel(in, 0)[i];
                for (int ch = 1; ch < C; ++ch) mx = std::max(mx, logits.channel(in, ch)[i]);
                T sum = 0;
                for (int ch = 0; ch < C; ++ch) {
                    const T e = std::exp(logits.channel(in, ch)[i] - mx);
                    probs.channel(in, ch)[i] = e;
                    sum += e;
                }
                for (int ch = 0; ch < C; ++ch) probs.channel(in, ch)[i] /= sum;
            }
        }
    }
}

template <typename T>
void softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs, Tensor<T>& dlogits) {
    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    const int N = probs.n, C = probs.c;
#pragma omp parallel for schedule(static)
    for (int in = 0; in < N; ++in)
        for (std::size_t i = 0; i < plane; ++i) {
            T dot = 0;
            for (int ch = 0; ch < C; ++ch)
                dot += dprobs.channel(in, ch)[i] * probs.channel(in, ch)[i];
            for (int ch = 0; ch < C; ++ch)
                dlogits.channel(in, ch)[i] =
                    probs.channel(in, ch)[i] * (dprobs.channel(in, ch)[i] - dot);
        }
}

}  // namespace omp

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    if (parallel_enabled()) omp::relu_forward(x, y);
    else serial::relu_forward(x, y);
}
template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
    if (parallel_enabled()) omp::relu_backward(y, dy, dx);
    else serial::relu_backward(y, dy, dx);
}
template <typename T>
void upsample2x_forward(const Tensor<T>& x, Tensor<T>& y) {
    if (parallel_enabled()) omp::upsample2x_forward(x, y);
    else serial::upsample2x_forward(x, y);
}
template <typename T>
void upsample2x_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    if (parallel_enabled()) omp::upsample2x_backward(dy, dx);
    else serial::upsample2x_backward(dy, dx);
}
template <typename T>
void softmax_forward(const Tensor<T>& logits, Tensor<T>& probs) {
    if (parallel_enabled()) omp::softmax_forward(logits, probs);
    else serial::softmax_forward(logits, probs);
}
template <typename T>
void softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs, Tensor<T>& dlogits) {
    if (parallel_enabled()) omp::softmax_backward(probs, dprobs, dlogits);
    else serial::softmax_backward(probs, dprobs, dlogits);
}

}  // namespace foct::kernels
