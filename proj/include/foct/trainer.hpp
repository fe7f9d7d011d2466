#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foct/config.hpp"
#include "foct/data.hpp"
#include "foct/losses.hpp"
#include "foct/metrics.hpp"
#include "foct/model.hpp"

// Training loop: one labeled and one unlabeled batch per iteration, forward
// passes through the shared encoder and both decoders, loss assembly, and a
// momentum-SGD update. The clean main-branch pass on unlabeled data is used
// as a constant target: no gradient ever flows into the main decoder from
// the consistency terms (except in no_aux_decoder mode, which by design
// trains the main decoder on the perturbed pass).

namespace foct {

// Endless pass over a fixed index set, reshuffled per pass from a stream
// derived off (seed, stream, pass-number) so draws stay independent of any
// other consumer of randomness.
class BatchCycler {
public:
    BatchCycler() = default;
    BatchCycler(std::vector<int> indices, std::uint64_t seed, std::uint64_t stream);
    std::vector<int> next(int batch_size);

private:
    void reshuffle();
    std::vector<int> order_;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t pass_ = 0;
    std::size_t cursor_ = 0;
};

struct TrainResult {
    std::vector<LossBreakdown> history;
    std::string checkpoint_path;
    std::string loss_csv_path;
    int perturb_depth = 0;
};

class Trainer {
public:
    Trainer(TrainConfig cfg, Dataset& data);

    // One optimization step at iteration t. Throws on non-finite losses.
    LossBreakdown step(long t);

    // Full loop: writes loss_history.csv, periodic and final checkpoints
    // (and eval_history.csv when eval_every > 0) under out_dir.
    TrainResult run(const std::string& out_dir);

    MetricsReport evaluate(const std::string& split_name);

    Model<float>& model() { return model_; }
    const TrainConfig& config() const { return cfg_; }
    int perturb_depth() const { return perturb_depth_; }

private:
    void update_params();

    TrainConfig cfg_;
    Dataset& data_;
    Model<float> model_;
    int perturb_depth_ = 1;
    BatchCycler labeled_;
    BatchCycler unlabeled_;
    std::vector<std::vector<float>> velocity_;  // one slot per parameter tensor
};

// Per-pixel argmax over the class dimension.
MaskBatch prediction_mask(const Tensor<float>& probs);

const std::vector<int>& split_indices(const Dataset& data, const std::string& name);

// Main-branch inference over the given items, micro-averaged counts.
ConfusionCounts evaluate_confusion(Model<float>& model, const Dataset& data,
                                   const std::vector<int>& indices, int batch_size);

}  // namespace foct
