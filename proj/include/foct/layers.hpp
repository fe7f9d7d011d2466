#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "foct/kernels.hpp"
#include "foct/rng.hpp"
#include "foct/tensor.hpp"

namespace foct {

// Handle to one parameter array and its gradient accumulator; the unit the
// optimizer and the checkpoint writer operate on.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<int> shape;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
};

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, int stride, int pad)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
          w_(out_c, in_c, k, k), dw_(out_c, in_c, k, k),
          b_(out_c, T(0)), db_(out_c, T(0)) {}

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
        for (T& v : w_.data) v = static_cast<T>(rng.normal(0.0, stddev));
        std::fill(b_.begin(), b_.end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.c != in_c_)
            throw std::invalid_argument("Conv2d: expected " + std::to_string(in_c_) +
                                        " input channels, got " + std::to_string(x.c));
        Tensor<T> y(x.n, out_c_, kernels::conv_out_extent(x.h, k_, stride_, pad_),
                    kernels::conv_out_extent(x.w, k_, stride_, pad_));
        kernels::conv2d_forward(x, w_, b_, y, stride_, pad_);
        return y;
    }

    // Accumulates dw/db; returns dx (empty tensor when need_input_grad is false).
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool need_input_grad = true) {
        kernels::conv2d_backward_params(x, dy, dw_, db_, stride_, pad_);
        if (!need_input_grad) return Tensor<T>();
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        kernels::conv2d_backward_input(dy, w_, dx, stride_, pad_);
        return dx;
    }

    void zero_grad() {
        dw_.fill(T(0));
        std::fill(db_.begin(), db_.end(), T(0));
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + "/w", {out_c_, in_c_, k_, k_}, &w_.data, &dw_.data});
        out.push_back({prefix + "/b", {out_c_}, &b_, &db_});
    }

    int out_channels() const { return out_c_; }
    int in_channels() const { return in_c_; }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    Tensor<T> w_, dw_;
    std::vector<T> b_, db_;
};

template <typename T>
struct NormCache {
    std::vector<T> mean, rstd;
};

template <typename T>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(int channels, int groups) : channels_(channels), groups_(groups) {
        gamma_.assign(channels, T(1));
        beta_.assign(channels, T(0));
        dgamma_.assign(channels, T(0));
        dbeta_.assign(channels, T(0));
        if (channels % groups != 0)
            throw std::invalid_argument("GroupNorm: groups must divide channels");
    }

    Tensor<T> forward(const Tensor<T>& x, NormCache<T>& cache) const {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        kernels::group_norm_forward(x, gamma_, beta_, groups_, eps_, y, cache.mean, cache.rstd);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& x, const NormCache<T>& cache, const Tensor<T>& dy) {
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        kernels::group_norm_backward(x, dy, gamma_, groups_, cache.mean, cache.rstd, dx,
                                     dgamma_, dbeta_);
        return dx;
    }

    void zero_grad() {
        std::fill(dgamma_.begin(), dgamma_.end(), T(0));
        std::fill(dbeta_.begin(), dbeta_.end(), T(0));
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + "/gamma", {channels_}, &gamma_, &dgamma_});
        out.push_back({prefix + "/beta", {channels_}, &beta_, &dbeta_});
    }

private:
    int channels_ = 0, groups_ = 1;
    T eps_ = static_cast<T>(1e-5);
    std::vector<T> gamma_, beta_, dgamma_, dbeta_;
};

// conv -> group norm -> relu
template <typename T>
struct ConvBlockCache {
    Tensor<T> conv_out;   // pre-norm
    NormCache<T> norm;
    Tensor<T> act_out;    // post-relu
};

template <typename T>
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(int in_c, int out_c, int k, int stride, int pad, int norm_groups)
        : conv(in_c, out_c, k, stride, pad), norm(out_c, norm_groups) {}

    void init(Rng& rng) { conv.init(rng); }

    const Tensor<T>& forward(const Tensor<T>& x, ConvBlockCache<T>& c) const {
        c.conv_out = conv.forward(x);
        Tensor<T> normed = norm.forward(c.conv_out, c.norm);
        c.act_out = Tensor<T>(normed.n, normed.c, normed.h, normed.w);
        kernels::relu_forward(normed, c.act_out);
        return c.act_out;
    }

    Tensor<T> backward(const Tensor<T>& x, const ConvBlockCache<T>& c, const Tensor<T>& dy,
                       bool need_input_grad = true) {
        Tensor<T> dnorm(dy.n, dy.c, dy.h, dy.w);
        kernels::relu_backward(c.act_out, dy, dnorm);
        Tensor<T> dconv = norm.backward(c.conv_out, c.norm, dnorm);
        return conv.backward(x, dconv, need_input_grad);
    }

    void zero_grad() {
        conv.zero_grad();
        norm.zero_grad();
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        conv.collect_params(prefix + "/conv", out);
        norm.collect_params(prefix + "/norm", out);
    }

    Conv2d<T> conv;
    GroupNorm<T> norm;
};

// Largest divisor of c that is <= 8; keeps group sizes sane across widths.
inline int norm_groups_for(int c) {
    for (int g = std::min(8, c); g > 1; --g)
        if (c % g == 0) return g;
    return 1;
}

}  // namespace foct
