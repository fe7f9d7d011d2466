#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "foct/kernels.hpp"
#include "foct/tensor.hpp"

namespace foct {

// Half-pixel-center bilinear resampling, each channel independently.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& in, int oh, int ow) {
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("bilinear_resize: bad target size");
    if (oh == in.h && ow == in.w) return in;
    Tensor<T> out(in.n, in.c, oh, ow);
    const double sy = static_cast<double>(in.h) / oh;
    const double sx = static_cast<double>(in.w) / ow;
    for (int n = 0; n < in.n; ++n) {
        for (int c = 0; c < in.c; ++c) {
            const T* src = in.channel(n, c);
            T* dst = out.channel(n, c);
            for (int y = 0; y < oh; ++y) {
                double fy = (y + 0.5) * sy - 0.5;
                fy = std::clamp(fy, 0.0, static_cast<double>(in.h - 1));
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, in.h - 1);
                const double wy = fy - y0;
                for (int x = 0; x < ow; ++x) {
                    double fx = (x + 0.5) * sx - 0.5;
                    fx = std::clamp(fx, 0.0, static_cast<double>(in.w - 1));
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, in.w - 1);
                    const double wx = fx - x0;
                    const double v00 = src[y0 * in.w + x0], v01 = src[y0 * in.w + x1];
                    const double v10 = src[y1 * in.w + x0], v11 = src[y1 * in.w + x1];
                    dst[y * ow + x] = static_cast<T>((1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                                    wy * ((1 - wx) * v10 + wx * v11));
                }
            }
        }
    }
    return out;
}

namespace probe_detail {

template <typename T>
void variation_rows(const Tensor<T>& f, int n, int y_begin, int y_end, T* dst) {
    const int h = f.h, w = f.w, c = f.c;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const T* base = f.channel(n, 0);
    for (int y = y_begin; y < y_end; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            int neighbors = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dy && !dx) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    double d2 = 0;
                    const T* a = base + y * w + x;
                    const T* b = base + ny * w + nx;
#pragma omp simd reduction(+ : d2)
                    for (int ch = 0; ch < c; ++ch) {
                        const double d = static_cast<double>(a[ch * plane]) -
                                         static_cast<double>(b[ch * plane]);
                        d2 += d * d;
                    }
                    acc += std::sqrt(d2);
                    ++neighbors;
                }
            }
            dst[y * w + x] = static_cast<T>(neighbors ? acc / neighbors : 0.0);
        }
    }
}

}  // namespace probe_detail

// Mean Euclidean distance between each location's channel vector and its
// available 8 neighbors, computed after resampling the features to the target
// size. Border locations average over the neighbors that exist.
template <typename T>
Tensor<T> local_variation_map(const Tensor<T>& features, int target_h, int target_w) {
    if (!features.all_finite())
        throw std::invalid_argument("local_variation_map: non-finite features");
    if (target_h < 2 && target_w < 2)
        throw std::invalid_argument("local_variation_map: degenerate target size (no neighbors)");
    Tensor<T> f = bilinear_resize(features, target_h, target_w);
    Tensor<T> out(f.n, 1, f.h, f.w);
    for (int n = 0; n < f.n; ++n) {
        T* dst = out.channel(n, 0);
        if (kernels::parallel_enabled()) {
#pragma omp parallel for schedule(static)
            for (int y = 0; y < f.h; ++y) probe_detail::variation_rows(f, n, y, y + 1, dst);
        } else {
            probe_detail::variation_rows(f, n, 0, f.h, dst);
        }
    }
    return out;
}

// Pixels within Chebyshev distance `radius` of a mask class boundary. A
// boundary pixel is one with an 8-neighbor of the opposite class.
std::vector<std::uint8_t> boundary_band(const std::uint8_t* mask, int h, int w, int radius);

struct ProbeBandStats {
    double boundary_mean = 0;
    double interior_mean = 0;
    long boundary_px = 0;
    long interior_px = 0;
};

// Mean variation inside vs outside the boundary band of the reference mask.
ProbeBandStats band_stats(const float* variation, const std::uint8_t* mask, int h, int w,
                          int radius);

}  // namespace foct
