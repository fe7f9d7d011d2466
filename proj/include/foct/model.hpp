#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "foct/layers.hpp"
#include "foct/perturb.hpp"

namespace foct {

struct ModelConfig {
    int in_channels = 3;
    int num_classes = 2;
    int base_width = 8;
    int depth = 5;            // encoder downsampling stages; decoder mirrors it
    int double_until = 4;     // widths double up to this depth, then stay capped
    bool skip_connections = false;

    int width_at(int d) const {
        int e = std::min(d, double_until) - 1;
        return base_width << e;
    }
    // decoder stage widths, j = 1..depth
    int dec_width_at(int j) const {
        return j < depth ? width_at(depth - j) : base_width;
    }
};

// One encoder stage: stride-2 conv block then a stride-1 conv block.
template <typename T>
struct EncoderStage {
    ConvBlock<T> down;
    ConvBlock<T> conv;
};

template <typename T>
struct EncoderStageCache {
    ConvBlockCache<T> down;
    ConvBlockCache<T> conv;
};

// All activations of one encoder forward, including what backward needs.
// act(d) is the ladder value actually flowing at depth d: the raw input at
// d = 0, and the post-injection tensor at the injected depth.
template <typename T>
struct EncoderPass {
    Tensor<T> input;
    std::vector<EncoderStageCache<T>> stages;
    int inj_depth = -1;          // -1: clean pass
    Tensor<T> inj_noise;
    Tensor<T> inj_out;           // act at inj_depth after injection

    const Tensor<T>& act(int d) const {
        if (d == 0) return input;
        if (d == inj_depth) return inj_out;
        return stages[d - 1].conv.act_out;
    }
    const Tensor<T>& z_out() const { return act(static_cast<int>(stages.size())); }
};

template <typename T>
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(const ModelConfig& cfg) : cfg_(cfg) {
        for (int d = 1; d <= cfg.depth; ++d) {
            const int in_c = d == 1 ? cfg.in_channels : cfg.width_at(d - 1);
            const int out_c = cfg.width_at(d);
            stages_.push_back({ConvBlock<T>(in_c, out_c, 3, 2, 1, norm_groups_for(out_c)),
                               ConvBlock<T>(out_c, out_c, 3, 1, 1, norm_groups_for(out_c))});
        }
    }

    void init(Rng& rng) {
        for (auto& s : stages_) {
            s.down.init(rng);
            s.conv.init(rng);
        }
    }

    void forward(const Tensor<T>& x, EncoderPass<T>& pass) const {
        forward_injected(x, -1, Tensor<T>(), pass);
    }

    // Runs the ladder, replacing the depth-d activation with its perturbed
    // version before the subsequent stages. inj_depth = -1 disables.
    void forward_injected(const Tensor<T>& x, int inj_depth, Tensor<T> noise,
                          EncoderPass<T>& pass) const {
        if (x.h % (1 << cfg_.depth) != 0 || x.w % (1 << cfg_.depth) != 0)
            throw std::invalid_argument("Encoder: input size " + x.shape_str() +
                                        " not divisible by 2^" + std::to_string(cfg_.depth));
        if (inj_depth != -1 && (inj_depth < 1 || inj_depth > cfg_.depth))
            throw std::out_of_range("Encoder: injection depth " + std::to_string(inj_depth) +
                                    " outside [1, " + std::to_string(cfg_.depth) + "]");
        pass.input = x;
        pass.stages.resize(stages_.size());
        pass.inj_depth = inj_depth;
        const Tensor<T>* cur = &pass.input;
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            stages_[s].down.forward(*cur, pass.stages[s].down);
            stages_[s].conv.forward(pass.stages[s].down.act_out, pass.stages[s].conv);
            cur = &pass.stages[s].conv.act_out;
            if (static_cast<int>(s) + 1 == inj_depth) {
                pass.inj_noise = std::move(noise);
                pass.inj_out = perturb::inject(*cur, pass.inj_noise);
                cur = &pass.inj_out;
            }
        }
    }

    // d_zout is the gradient w.r.t. the ladder value at the deepest depth.
    // skip_grads, when given, is indexed by encoder depth (entry 0 unused);
    // a nonempty entry d is an extra gradient w.r.t. act(d).
    void backward(const EncoderPass<T>& pass, const Tensor<T>& d_zout,
                  const std::vector<Tensor<T>>* skip_grads = nullptr) {
        Tensor<T> g = d_zout;
        for (int d = static_cast<int>(stages_.size()); d >= 1; --d) {
            if (d == pass.inj_depth) {
                // through z~ = z (1 + n)
                const Tensor<T>& nz = pass.inj_noise;
                for (std::size_t i = 0; i < g.size(); ++i)
                    g.data[i] *= T(1) + nz.data[i];
            }
            auto& st = stages_[d - 1];
            const auto& cache = pass.stages[d - 1];
            Tensor<T> g_mid = st.conv.backward(cache.down.act_out, cache.conv, g, true);
            const Tensor<T>& stage_in = d == 1 ? pass.input
                                               : pass.act(d - 1);
            g = st.down.backward(stage_in, cache.down, g_mid, d > 1);
            if (d > 1 && skip_grads && !(*skip_grads)[d - 1].empty()) {
                const Tensor<T>& extra = (*skip_grads)[d - 1];  // arrives at act(d-1)
                for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += extra.data[i];
            }
        }
    }

    void zero_grad() {
        for (auto& s : stages_) {
            s.down.zero_grad();
            s.conv.zero_grad();
        }
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            const std::string p = prefix + "/stage" + std::to_string(s + 1);
            stages_[s].down.collect_params(p + "/down", out);
            stages_[s].conv.collect_params(p + "/conv", out);
        }
    }

    int depth() const { return cfg_.depth; }

private:
    ModelConfig cfg_;
    std::vector<EncoderStage<T>> stages_;
};

// Per-pixel class probabilities plus the per-stage feature taps.
template <typename T>
struct DecoderPass {
    struct Stage {
        Tensor<T> up_out;        // after nearest-neighbor 2x
        Tensor<T> block_in;      // up_out, or concat(up_out, skip)
        ConvBlockCache<T> block;
    };
    std::vector<Stage> stages;
    Tensor<T> logits;
    Tensor<T> probs;

    const Tensor<T>& tap(int j) const { return stages[j - 1].block.act_out; }
    int num_taps() const { return static_cast<int>(stages.size()); }
};

template <typename T>
class Decoder {
public:
    Decoder() = default;
    explicit Decoder(const ModelConfig& cfg) : cfg_(cfg) {
        int prev = cfg.width_at(cfg.depth);
        for (int j = 1; j <= cfg.depth; ++j) {
            const int out_c = cfg.dec_width_at(j);
            int in_c = prev;
            if (cfg.skip_connections && j < cfg.depth) in_c += cfg.width_at(cfg.depth - j);
            blocks_.push_back(ConvBlock<T>(in_c, out_c, 3, 1, 1, norm_groups_for(out_c)));
            prev = out_c;
        }
        head_ = Conv2d<T>(prev, cfg.num_classes, 1, 1, 0);
    }

    void init(Rng& rng) {
        for (auto& b : blocks_) b.init(rng);
        head_.init(rng);
    }

    // enc is only consulted when skip connections are enabled.
    void forward(const Tensor<T>& z, DecoderPass<T>& pass,
                 const EncoderPass<T>* enc = nullptr) const {
        if (cfg_.skip_connections && enc == nullptr)
            throw std::invalid_argument("Decoder: skip connections need the encoder pass");
        pass.stages.resize(blocks_.size());
        const Tensor<T>* cur = &z;
        for (std::size_t j = 0; j < blocks_.size(); ++j) {
            auto& st = pass.stages[j];
            st.up_out = Tensor<T>(cur->n, cur->c, cur->h * 2, cur->w * 2);
            kernels::upsample2x_forward(*cur, st.up_out);
            const int jd = static_cast<int>(j) + 1;
            if (cfg_.skip_connections && jd < cfg_.depth) {
                st.block_in = concat_channels(st.up_out, enc->act(cfg_.depth - jd));
            } else {
                st.block_in = st.up_out;
            }
            blocks_[j].forward(st.block_in, st.block);
            cur = &st.block.act_out;
        }
        pass.logits = head_.forward(*cur);
        pass.probs = Tensor<T>(pass.logits.n, pass.logits.c, pass.logits.h, pass.logits.w);
        kernels::softmax_forward(pass.logits, pass.probs);
    }

    // dprobs: gradient w.r.t. probs (may be empty); dtaps[j-1]: extra gradient
    // w.r.t. tap j (entries may be empty). Returns the gradient w.r.t. z.
    // When skips are active, per-depth gradients w.r.t. encoder activations are
    // accumulated into *skip_grads_out (indexed by encoder depth).
    Tensor<T> backward(const DecoderPass<T>& pass, const Tensor<T>& dprobs,
                       const std::vector<Tensor<T>>& dtaps,
                       std::vector<Tensor<T>>* skip_grads_out = nullptr) {
        Tensor<T> g;
        if (!dprobs.empty()) {
            Tensor<T> dlogits(pass.logits.n, pass.logits.c, pass.logits.h, pass.logits.w);
            kernels::softmax_backward(pass.probs, dprobs, dlogits);
            g = head_.backward(pass.tap(pass.num_taps()), dlogits, true);
        }
        for (int j = static_cast<int>(blocks_.size()); j >= 1; --j) {
            const auto& st = pass.stages[j - 1];
            if (!dtaps.empty() && !dtaps[j - 1].empty()) {
                const Tensor<T>& extra = dtaps[j - 1];
                if (g.empty()) {
                    g = extra;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += extra.data[i];
                }
            }
            if (g.empty())
                throw std::invalid_argument("Decoder::backward: no gradient reaches tap " +
                                            std::to_string(j));
            Tensor<T> d_in = blocks_[j - 1].backward(st.block_in, st.block, g, true);
            Tensor<T> d_up;
            if (st.block_in.c != st.up_out.c) {
                d_up = Tensor<T>(st.up_out.n, st.up_out.c, st.up_out.h, st.up_out.w);
                Tensor<T> d_skip(d_in.n, d_in.c - st.up_out.c, d_in.h, d_in.w);
                split_channels(d_in, d_up, d_skip);
                if (skip_grads_out) {
                    const int enc_depth = cfg_.depth - j;
                    accumulate_or_set((*skip_grads_out)[enc_depth], d_skip);
                }
            } else {
                d_up = std::move(d_in);
            }
            g = Tensor<T>(d_up.n, d_up.c, d_up.h / 2, d_up.w / 2);
            kernels::upsample2x_backward(d_up, g);
        }
        return g;
    }

    void zero_grad() {
        for (auto& b : blocks_) b.zero_grad();
        head_.zero_grad();
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        for (std::size_t j = 0; j < blocks_.size(); ++j)
            blocks_[j].collect_params(prefix + "/stage" + std::to_string(j + 1), out);
        head_.collect_params(prefix + "/head", out);
    }

private:
    static Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
        check_same_shape(a.n, 1, a.h, a.w, b.n, 1, b.h, b.w, "concat_channels");
        Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
        const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
        for (int in = 0; in < a.n; ++in) {
            for (int ch = 0; ch < a.c; ++ch)
                std::copy_n(a.channel(in, ch), plane, out.channel(in, ch));
            for (int ch = 0; ch < b.c; ++ch)
                std::copy_n(b.channel(in, ch), plane, out.channel(in, a.c + ch));
        }
        return out;
    }

    static void split_channels(const Tensor<T>& cat, Tensor<T>& a, Tensor<T>& b) {
        const std::size_t plane = static_cast<std::size_t>(cat.h) * cat.w;
        for (int in = 0; in < cat.n; ++in) {
            for (int ch = 0; ch < a.c; ++ch)
                std::copy_n(cat.channel(in, ch), plane, a.channel(in, ch));
            for (int ch = 0; ch < b.c; ++ch)
                std::copy_n(cat.channel(in, a.c + ch), plane, b.channel(in, ch));
        }
    }

    static void accumulate_or_set(Tensor<T>& dst, const Tensor<T>& src) {
        if (dst.empty()) {
            dst = src;
        } else {
            for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
        }
    }

    ModelConfig cfg_;
    std::vector<ConvBlock<T>> blocks_;
    Conv2d<T> head_;
};

// Shared encoder plus two structurally identical decoders. The main decoder
// is the prediction branch; the auxiliary decoder consumes perturbed encoder
// output during training and is unused at test time.
template <typename T>
class Model {
public:
    Model() = default;
    explicit Model(const ModelConfig& cfg)
        : cfg_(cfg), encoder(cfg), dec_main(cfg), dec_aux(cfg) {}

    void init(std::uint64_t seed) {
        Rng re(derive_seed(seed, 0xE0));
        Rng rd(derive_seed(seed, 0xD0));
        encoder.init(re);
        dec_main.init(rd);
        // the auxiliary decoder starts as a copy of the main one, so the two
        // branches agree at step 0 and the consistency terms measure only the
        // response to the injected perturbation
        Rng rg(derive_seed(seed, 0xD0));
        dec_aux.init(rg);
    }

    std::vector<ParamRef<T>> encoder_params() {
        std::vector<ParamRef<T>> out;
        encoder.collect_params("E", out);
        return out;
    }
    std::vector<ParamRef<T>> main_params() {
        std::vector<ParamRef<T>> out;
        dec_main.collect_params("D", out);
        return out;
    }
    std::vector<ParamRef<T>> aux_params() {
        std::vector<ParamRef<T>> out;
        dec_aux.collect_params("G", out);
        return out;
    }
    std::vector<ParamRef<T>> all_params() {
        std::vector<ParamRef<T>> out = encoder_params();
        auto d = main_params();
        auto g = aux_params();
        out.insert(out.end(), d.begin(), d.end());
        out.insert(out.end(), g.begin(), g.end());
        return out;
    }

    void zero_grad() {
        encoder.zero_grad();
        dec_main.zero_grad();
        dec_aux.zero_grad();
    }

    const ModelConfig& config() const { return cfg_; }

    ModelConfig cfg_;
    Encoder<T> encoder;
    Decoder<T> dec_main;
    Decoder<T> dec_aux;
};

}  // namespace foct
