#pragma once

#include <string>

#include "foct/config.hpp"
#include "foct/model.hpp"

// Versioned checkpoint container: a small JSON header (config snapshot,
// iteration, parameter directory) followed by raw little-endian float32
// payload in canonical parameter order. Round-trips bitwise.

namespace foct {

struct CheckpointRecord {
    TrainConfig config;
    int iteration = 0;
    std::string loss_history;  // relative path of the loss CSV, may be empty
    Model<float> model;
};

void save_checkpoint(const std::string& path, Model<float>& model, const TrainConfig& cfg,
                     int iteration, const std::string& loss_history_ref);

// Reconstructs the model from the embedded config and verifies the parameter
// directory (names, shapes, element counts) before copying values in.
CheckpointRecord load_checkpoint(const std::string& path);

}  // namespace foct
