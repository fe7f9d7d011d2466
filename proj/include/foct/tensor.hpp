#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace foct {

// Dense NCHW tensor. Rank-collapsed views are by convention: a bias vector is
// (1, c, 1, 1), a per-pixel mask batch lives in MaskBatch instead.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("Tensor: extents must be positive, got (" +
                                        std::to_string(n_) + "," + std::to_string(c_) + "," +
                                        std::to_string(h_) + "," + std::to_string(w_) + ")");
        data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill);
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& at(int in, int ic, int ih, int iw) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    T at(int in, int ic, int ih, int iw) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    T* channel(int in, int ic) {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }
    const T* channel(int in, int ic) const {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline void check_same_shape(int an, int ac, int ah, int aw, int bn, int bc, int bh, int bw,
                             const char* what) {
    if (an != bn || ac != bc || ah != bh || aw != bw)
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

// Batch of binary masks / label maps, one byte per pixel.
struct MaskBatch {
    int n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> data;

    MaskBatch() = default;
    MaskBatch(int n_, int h_, int w_, std::uint8_t fill = 0) : n(n_), h(h_), w(w_) {
        if (n_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("MaskBatch: extents must be positive");
        data.assign(static_cast<std::size_t>(n_) * h_ * w_, fill);
    }

    std::uint8_t& at(int in, int ih, int iw) {
        return data[(static_cast<std::size_t>(in) * h + ih) * w + iw];
    }
    std::uint8_t at(int in, int ih, int iw) const {
        return data[(static_cast<std::size_t>(in) * h + ih) * w + iw];
    }
    std::size_t size() const { return data.size(); }
};

}  // namespace foct
