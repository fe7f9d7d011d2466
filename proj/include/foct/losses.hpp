#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "foct/tensor.hpp"

namespace foct {

struct LossWeights {
    double alpha = 0.6;        // final consistency weight
    double omega_u = 0.2;      // feature-consistency weight inside l_cons
    double ramp_frac = 0.3;    // fraction of total iters over which lambda ramps
    double eta_start = 0.5;
    double eta_end = 0.9;
    double anneal_frac = 0.3;  // fraction of total iters over which eta anneals

    void validate() const {
        if (alpha < 0) throw std::invalid_argument("LossWeights: alpha < 0");
        if (omega_u < 0) throw std::invalid_argument("LossWeights: omega_u < 0");
        if (!(ramp_frac > 0 && ramp_frac <= 1))
            throw std::invalid_argument("LossWeights: ramp_frac outside (0,1]");
        if (!(anneal_frac > 0 && anneal_frac <= 1))
            throw std::invalid_argument("LossWeights: anneal_frac outside (0,1]");
        if (!(eta_start >= 0 && eta_start <= eta_end && eta_end <= 1))
            throw std::invalid_argument("LossWeights: need 0 <= eta_start <= eta_end <= 1");
    }
};

struct LossBreakdown {
    double l_s = 0;
    double l_up = 0;
    double l_uf = 0;
    double l_cons = 0;
    double lambda_t = 0;
    double eta = 0;
    double total = 0;
    double masked_pixel_fraction = 0;  // labeled pixels contributing to l_s
};

// Consistency weight: Gaussian ramp from ~0 at t=0 up to alpha at
// t = ramp_frac * total_iters, constant alpha afterwards.
inline double lambda_schedule(long t, long total_iters, const LossWeights& w) {
    if (t < 0 || total_iters <= 0)
        throw std::invalid_argument("lambda_schedule: need t >= 0, total_iters > 0");
    const double T = w.ramp_frac * static_cast<double>(total_iters);
    if (static_cast<double>(t) >= T) return w.alpha;
    const double a = 1.0 - static_cast<double>(t) / T;
    return w.alpha * std::exp(-5.0 * a * a);
}

// Confidence ceiling for the bootstrapped loss: linear from eta_start to
// eta_end over the first anneal_frac * total_iters iterations.
inline double eta_schedule(long t, long total_iters, const LossWeights& w) {
    if (t < 0 || total_iters <= 0)
        throw std::invalid_argument("eta_schedule: need t >= 0, total_iters > 0");
    const double A = w.anneal_frac * static_cast<double>(total_iters);
    if (static_cast<double>(t) >= A) return w.eta_end;
    return w.eta_start + (w.eta_end - w.eta_start) * static_cast<double>(t) / A;
}

inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;

template <typename T>
struct CeResult {
    double loss = 0;
    double masked_pixel_fraction = 0;
    Tensor<T> dprobs;  // empty when gradients were not requested
};

// Cross-entropy over pixels whose true-class probability is strictly below
// eta, averaged over those pixels; 0 when none qualify. Easy pixels (already
// confident) are excluded so training cannot keep sharpening them.
template <typename T>
CeResult<T> bootstrapped_ce(const Tensor<T>& probs, const MaskBatch& labels, double eta,
                            bool want_grad = true) {
    if (probs.n != labels.n || probs.h != labels.h || probs.w != labels.w)
        throw std::invalid_argument("bootstrapped_ce: probs " + probs.shape_str() +
                                    " vs labels (" + std::to_string(labels.n) + ",.," +
                                    std::to_string(labels.h) + "," + std::to_string(labels.w) +
                                    ")");
    if (!(eta >= 0 && eta <= 1)) throw std::invalid_argument("bootstrapped_ce: eta outside [0,1]");
    for (const T& p : probs.data)
        if (!(p >= T(0) && p <= T(1)))
            throw std::invalid_argument("bootstrapped_ce: probability outside [0,1]");
    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    for (int in = 0; in < probs.n; ++in)
        for (std::size_t px = 0; px < plane; ++px) {
            double s = 0;
            for (int ch = 0; ch < probs.c; ++ch) s += probs.channel(in, ch)[px];
            if (std::abs(s - 1.0) > 1e-5)
                throw std::invalid_argument("bootstrapped_ce: pixel probabilities sum to " +
                                            std::to_string(s));
        }

    CeResult<T> res;
    if (want_grad) res.dprobs = Tensor<T>(probs.n, probs.c, probs.h, probs.w, T(0));
    double sum = 0;
    std::size_t contributing = 0;
    std::vector<std::size_t> hit;  // flat index of the true-class entry per contributing pixel
    for (int in = 0; in < probs.n; ++in) {
        for (std::size_t px = 0; px < plane; ++px) {
            const int cls = labels.data[static_cast<std::size_t>(in) * plane + px];
            if (cls < 0 || cls >= probs.c)
                throw std::invalid_argument("bootstrapped_ce: label out of class range");
            const std::size_t idx = (static_cast<std::size_t>(in) * probs.c + cls) * plane + px;
            const double p = static_cast<double>(probs.data[idx]);
            if (p < eta) {
                const double pc = std::min(std::max(p, kProbClampLo), kProbClampHi);
                sum += -std::log(pc);
                ++contributing;
                if (want_grad) hit.push_back(idx);
            }
        }
    }
    const std::size_t total_px = static_cast<std::size_t>(probs.n) * plane;
    res.masked_pixel_fraction =
        total_px ? static_cast<double>(contributing) / static_cast<double>(total_px) : 0.0;
    if (contributing == 0) return res;
    res.loss = sum / static_cast<double>(contributing);
    if (want_grad) {
        const double inv_m = 1.0 / static_cast<double>(contributing);
        for (std::size_t idx : hit) {
            const double p = static_cast<double>(probs.data[idx]);
            // -log(clamp(p)) is flat where the clamp saturates
            if (p > kProbClampLo && p < kProbClampHi)
                res.dprobs.data[idx] = static_cast<T>(-inv_m / p);
        }
    }
    return res;
}

template <typename T>
struct MseResult {
    double loss = 0;
    Tensor<T> daux;  // gradient w.r.t. the auxiliary argument only
};

// Mean squared difference over all elements. The main argument is a constant
// target: no gradient is produced for it.
template <typename T>
MseResult<T> output_consistency(const Tensor<T>& main_out, const Tensor<T>& aux_out,
                                bool want_grad = true) {
    check_same_shape(main_out, aux_out, "output_consistency");
    MseResult<T> res;
    if (want_grad) res.daux = Tensor<T>(aux_out.n, aux_out.c, aux_out.h, aux_out.w, T(0));
    const double inv_n = 1.0 / static_cast<double>(aux_out.size());
    double sum = 0;
    for (std::size_t i = 0; i < aux_out.size(); ++i) {
        const double d = static_cast<double>(aux_out.data[i]) - static_cast<double>(main_out.data[i]);
        sum += d * d;
        if (want_grad) res.daux.data[i] = static_cast<T>(2.0 * d * inv_n);
    }
    res.loss = sum * inv_n;
    return res;
}

template <typename T>
struct FeatureConsistencyResult {
    double loss = 0;                  // sum over depths of per-depth MSE
    std::vector<Tensor<T>> daux;      // per-depth gradients w.r.t. aux taps
};

// Per-depth MSE between decoder feature taps, summed over depths. Main taps
// are constant targets.
template <typename T>
FeatureConsistencyResult<T> feature_consistency(const std::vector<const Tensor<T>*>& main_taps,
                                                const std::vector<const Tensor<T>*>& aux_taps,
                                                bool want_grad = true) {
    if (main_taps.size() != aux_taps.size() || main_taps.empty())
        throw std::invalid_argument("feature_consistency: tap lists must match and be non-empty");
    FeatureConsistencyResult<T> res;
    for (std::size_t j = 0; j < main_taps.size(); ++j) {
        auto part = output_consistency(*main_taps[j], *aux_taps[j], want_grad);
        res.loss += part.loss;
        if (want_grad) res.daux.push_back(std::move(part.daux));
    }
    return res;
}

// Assembles l_cons = l_up + omega_u*l_uf and total = l_s + lambda_t*l_cons.
inline LossBreakdown total_loss(double l_s, double l_up, double l_uf, double lambda_t,
                                double omega_u) {
    for (double v : {l_s, l_up, l_uf, lambda_t, omega_u})
        if (!std::isfinite(v)) throw std::invalid_argument("total_loss: non-finite input");
    if (l_s < 0 || l_up < 0 || l_uf < 0)
        throw std::invalid_argument("total_loss: negative loss term");
    LossBreakdown b;
    b.l_s = l_s;
    b.l_up = l_up;
    b.l_uf = l_uf;
    b.lambda_t = lambda_t;
    b.l_cons = l_up + omega_u * l_uf;
    b.total = l_s + lambda_t * b.l_cons;
    return b;
}

}  // namespace foct
