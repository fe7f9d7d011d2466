#pragma once

#include <cstdint>
#include <string>

#include "foct/losses.hpp"
#include "foct/model.hpp"
#include "foct/perturb.hpp"

// Training configuration shared by the trainer, checkpoints and the CLI.
// Loaded from JSON with strict key checking; unknown keys are errors so a
// typo in a config file never silently falls back to a default.

namespace foct {

enum class Mode {
    semi,                     // full objective: supervised + output + feature consistency
    supervised_only,          // labeled branch only (lambda treated as 0)
    output_only_consistency,  // consistency on decoder outputs, no feature taps
    no_aux_decoder,           // main decoder runs the perturbed pass itself
};

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);  // throws std::invalid_argument

// Sentinel for "derive the injection depth from labeled mask geometry".
inline constexpr int kPerturbDepthAuto = -1;

struct TrainConfig {
    int total_iters = 2000;
    int batch_size = 4;
    double lr = 0.1;
    double momentum = 0.9;
    int perturb_depth = kPerturbDepthAuto;
    double noise_bound = perturb::kDefaultNoiseBound;
    LossWeights weights{};
    std::uint64_t seed = 0;
    int eval_every = 0;        // 0 = evaluate only at the end
    int checkpoint_every = 0;  // 0 = write only the final checkpoint
    Mode mode = Mode::semi;
    ModelConfig model{};

    void validate() const;  // throws std::invalid_argument on bad fields
};

// Strict JSON round-trip. from_json applies values on top of defaults and
// rejects unknown keys; to_json emits the fully resolved snapshot.
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json_text(const TrainConfig& cfg);

// Stable hex digest of the resolved snapshot; used as the run id.
std::string config_digest(const TrainConfig& cfg);

}  // namespace foct
