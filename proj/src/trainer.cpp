#include "foct/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "foct/checkpoint.hpp"
#include "foct/geometry.hpp"
#include "foct/perturb.hpp"
#include "foct/rng.hpp"

namespace foct {

namespace {

constexpr std::uint64_t kLabeledShuffleStream = 0x1A;
constexpr std::uint64_t kUnlabeledShuffleStream = 0x1B;
constexpr std::uint64_t kNoiseStream = 0x0E;

void scale_in_place(Tensor<float>& t, double s) {
    const float f = static_cast<float>(s);
    for (float& v : t.data) v *= f;
}

}  // namespace

BatchCycler::BatchCycler(std::vector<int> indices, std::uint64_t seed, std::uint64_t stream)
    : order_(std::move(indices)), seed_(seed), stream_(stream) {
    reshuffle();
}

void BatchCycler::reshuffle() {
    Rng rng(derive_seed(seed_, stream_, pass_));
    rng.shuffle(order_.begin(), order_.end());
}

std::vector<int> BatchCycler::next(int batch_size) {
    if (order_.empty()) throw std::runtime_error("trainer: drawing batches from an empty split");
    std::vector<int> out;
    out.reserve(batch_size);
    while (static_cast<int>(out.size()) < batch_size) {
        if (cursor_ == order_.size()) {
            ++pass_;
            reshuffle();
            cursor_ = 0;
        }
        out.push_back(order_[cursor_++]);
    }
    return out;
}

Trainer::Trainer(TrainConfig cfg, Dataset& data)
    : cfg_(std::move(cfg)), data_(data), model_(cfg_.model) {
    cfg_.validate();
    if (data_.split().labeled.empty()) throw std::runtime_error("trainer: labeled split is empty");
    if (data_.patch_size() % (1 << cfg_.model.depth) != 0)
        throw std::runtime_error("trainer: patch size " + std::to_string(data_.patch_size()) +
                                 " not divisible by 2^" + std::to_string(cfg_.model.depth));
    model_.init(cfg_.seed);

    if (cfg_.perturb_depth == kPerturbDepthAuto) {
        // Injection depth from labeled-mask geometry only; unlabeled masks
        // must never be consulted.
        MaskBatch lab_masks = data_.mask_batch(data_.split().labeled);
        ResolutionSpec res{data_.resolution()};
        BuildingLengthStats stats = building_length_stats(lab_masks, res);
        DepthSelection sel = select_perturbation_depth(res, stats, cfg_.model.depth);
        if (sel.clamped)
            std::cerr << "trainer: derived injection depth clamped to " << sel.depth
                      << " (log2 value " << sel.log2_value << ", model depth "
                      << cfg_.model.depth << ")\n";
        perturb_depth_ = sel.depth;
    } else {
        perturb_depth_ = cfg_.perturb_depth;
    }

    labeled_ = BatchCycler(data_.split().labeled, cfg_.seed, kLabeledShuffleStream);
    unlabeled_ = BatchCycler(data_.split().unlabeled, cfg_.seed, kUnlabeledShuffleStream);
}

LossBreakdown Trainer::step(long t) {
    const LossWeights& w = cfg_.weights;
    const double eta = eta_schedule(t, cfg_.total_iters, w);
    const double lambda =
        cfg_.mode == Mode::supervised_only ? 0.0 : lambda_schedule(t, cfg_.total_iters, w);
    const bool want_feature = cfg_.mode != Mode::output_only_consistency;
    const double omega_eff = want_feature ? w.omega_u : 0.0;
    const bool use_skips = cfg_.model.skip_connections;

    model_.zero_grad();

    // Supervised branch on labeled data.
    const std::vector<int> lab_idx = labeled_.next(cfg_.batch_size);
    Tensor<float> x_l = data_.image_batch(lab_idx);
    MaskBatch y_l = data_.mask_batch(lab_idx);
    EncoderPass<float> enc_l;
    model_.encoder.forward(x_l, enc_l);
    DecoderPass<float> dec_l;
    model_.dec_main.forward(enc_l.z_out(), dec_l, &enc_l);
    auto ce = bootstrapped_ce(dec_l.probs, y_l, eta, true);
    if (ce.loss > 0) {
        std::vector<Tensor<float>> skips(cfg_.model.depth + 1);
        auto* sg = use_skips ? &skips : nullptr;
        Tensor<float> dz = model_.dec_main.backward(dec_l, ce.dprobs, {}, sg);
        model_.encoder.backward(enc_l, dz, sg);
    }

    // Consistency branch on unlabeled data.
    double l_up = 0, l_uf = 0;
    if (cfg_.mode != Mode::supervised_only && lambda > 0) {
        const std::vector<int> unl_idx = unlabeled_.next(cfg_.batch_size);
        Tensor<float> x_u = data_.image_batch(unl_idx);

        // Clean main-branch pass: forward only, a constant target.
        EncoderPass<float> enc_clean;
        model_.encoder.forward(x_u, enc_clean);
        DecoderPass<float> dec_clean;
        model_.dec_main.forward(enc_clean.z_out(), dec_clean, &enc_clean);

        const Tensor<float>& at_depth = enc_clean.act(perturb_depth_);
        Tensor<float> noise = perturb::sample_noise<float>(
            at_depth.n, at_depth.c, at_depth.h, at_depth.w,
            derive_seed(cfg_.seed, kNoiseStream, static_cast<std::uint64_t>(t)),
            cfg_.noise_bound);
        EncoderPass<float> enc_pert;
        model_.encoder.forward_injected(x_u, perturb_depth_, std::move(noise), enc_pert);
        Decoder<float>& aux =
            cfg_.mode == Mode::no_aux_decoder ? model_.dec_main : model_.dec_aux;
        DecoderPass<float> dec_pert;
        aux.forward(enc_pert.z_out(), dec_pert, &enc_pert);

        auto up = output_consistency(dec_clean.probs, dec_pert.probs, true);
        l_up = up.loss;

        std::vector<Tensor<float>> dtaps;
        if (want_feature) {
            std::vector<const Tensor<float>*> main_taps, aux_taps;
            for (int j = 1; j <= dec_clean.num_taps(); ++j) {
                main_taps.push_back(&dec_clean.tap(j));
                aux_taps.push_back(&dec_pert.tap(j));
            }
            auto fc = feature_consistency(main_taps, aux_taps, true);
            l_uf = fc.loss;
            dtaps.resize(fc.daux.size());
            for (std::size_t j = 0; j < fc.daux.size(); ++j) {
                dtaps[j] = std::move(fc.daux[j]);
                scale_in_place(dtaps[j], lambda * omega_eff);
            }
        }

        scale_in_place(up.daux, lambda);
        std::vector<Tensor<float>> skips(cfg_.model.depth + 1);
        auto* sg = use_skips ? &skips : nullptr;
        Tensor<float> dz = aux.backward(dec_pert, up.daux, dtaps, sg);
        model_.encoder.backward(enc_pert, dz, sg);
    }

    LossBreakdown b;
    try {
        b = total_loss(ce.loss, l_up, l_uf, lambda, omega_eff);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("trainer: iteration " + std::to_string(t) + ": " + e.what());
    }
    b.eta = eta;
    b.masked_pixel_fraction = ce.masked_pixel_fraction;

    update_params();
    return b;
}

void Trainer::update_params() {
    auto params = model_.all_params();
    if (velocity_.size() != params.size()) {
        velocity_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            velocity_[i].assign(params[i].value->size(), 0.f);
    }
    const float lr = static_cast<float>(cfg_.lr);
    const float mu = static_cast<float>(cfg_.momentum);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<float>& v = velocity_[i];
        std::vector<float>& p = *params[i].value;
        const std::vector<float>& g = *params[i].grad;
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = mu * v[j] + g[j];
            p[j] -= lr * v[j];
        }
    }
}

TrainResult Trainer::run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    TrainResult res;
    res.perturb_depth = perturb_depth_;
    res.loss_csv_path = out_dir + "/loss_history.csv";
    res.checkpoint_path = out_dir + "/checkpoint.ckpt";

    std::ofstream csv(res.loss_csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("trainer: cannot write " + res.loss_csv_path);
    csv << "iter,l_s,l_up,l_uf,l_cons,lambda,eta,total\n";

    std::ofstream eval_csv;
    if (cfg_.eval_every > 0) {
        eval_csv.open(out_dir + "/eval_history.csv", std::ios::trunc);
        if (!eval_csv)
            throw std::runtime_error("trainer: cannot write " + out_dir + "/eval_history.csv");
        eval_csv << "iter,split,tp,fp,fn,tn,precision,recall,f1,iou\n";
    }

    char line[512];
    for (long t = 0; t < cfg_.total_iters; ++t) {
        LossBreakdown b;
        try {
            b = step(t);
        } catch (const std::runtime_error&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("trainer: iteration " + std::to_string(t) + ": " + e.what());
        }
        res.history.push_back(b);
        std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t,
                      b.l_s, b.l_up, b.l_uf, b.l_cons, b.lambda_t, b.eta, b.total);
        csv << line;

        const long done = t + 1;
        if (cfg_.checkpoint_every > 0 && done % cfg_.checkpoint_every == 0 &&
            done < cfg_.total_iters)
            save_checkpoint(out_dir + "/checkpoint_" + std::to_string(done) + ".ckpt", model_,
                            cfg_, static_cast<int>(done), "loss_history.csv");
        if (cfg_.eval_every > 0 && done % cfg_.eval_every == 0) {
            ConfusionCounts c =
                evaluate_confusion(model_, data_, data_.split().val, cfg_.batch_size);
            MetricsReport m = report(c);
            std::snprintf(line, sizeof(line), "%ld,val,%lld,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g\n",
                          done, c.tp, c.fp, c.fn, c.tn, m.precision, m.recall, m.f1, m.iou);
            eval_csv << line;
        }
    }
    csv.flush();
    if (!csv) throw std::runtime_error("trainer: write failed for " + res.loss_csv_path);

    save_checkpoint(res.checkpoint_path, model_, cfg_, cfg_.total_iters, "loss_history.csv");
    return res;
}

MetricsReport Trainer::evaluate(const std::string& split_name) {
    ConfusionCounts c = evaluate_confusion(model_, data_, split_indices(data_, split_name),
                                           cfg_.batch_size);
    return report(c);
}

MaskBatch prediction_mask(const Tensor<float>& probs) {
    MaskBatch out;
    out.n = probs.n;
    out.h = probs.h;
    out.w = probs.w;
    out.data.resize(static_cast<std::size_t>(probs.n) * probs.h * probs.w);
    const std::size_t plane = static_cast<std::size_t>(probs.h) * probs.w;
    for (int in = 0; in < probs.n; ++in)
        for (std::size_t px = 0; px < plane; ++px) {
            int best = 0;
            float best_p = probs.channel(in, 0)[px];
            for (int ch = 1; ch < probs.c; ++ch) {
                const float p = probs.channel(in, ch)[px];
                if (p > best_p) {
                    best_p = p;
                    best = ch;
                }
            }
            out.data[in * plane + px] = static_cast<std::uint8_t>(best);
        }
    return out;
}

const std::vector<int>& split_indices(const Dataset& data, const std::string& name) {
    const DatasetSplit& s = data.split();
    if (name == "labeled") return s.labeled;
    if (name == "unlabeled") return s.unlabeled;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw std::invalid_argument("split: unknown name \"" + name +
                                "\" (expected labeled, unlabeled, val or test)");
}

ConfusionCounts evaluate_confusion(Model<float>& model, const Dataset& data,
                                   const std::vector<int>& indices, int batch_size) {
    if (indices.empty()) throw std::runtime_error("evaluate: split is empty");
    if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size < 1");
    ConfusionCounts counts;
    for (std::size_t at = 0; at < indices.size(); at += batch_size) {
        const std::size_t end = std::min(indices.size(), at + batch_size);
        std::vector<int> chunk(indices.begin() + at, indices.begin() + end);
        Tensor<float> x = data.image_batch(chunk);
        EncoderPass<float> enc;
        model.encoder.forward(x, enc);
        DecoderPass<float> dec;
        model.dec_main.forward(enc.z_out(), dec, &enc);
        MaskBatch pred = prediction_mask(dec.probs);
        MaskBatch gt = data.mask_batch(chunk);
        counts += confusion(pred, gt);
    }
    return counts;
}

}  // namespace foct
