#pragma once

#include <cstdint>
#include <vector>

#include "foct/tensor.hpp"

namespace foct {

struct ResolutionSpec {
    double r = 1.0;  // meters per pixel
};

struct BuildingLengthStats {
    double l_min_mean = 0;  // meters, mean of shorter bbox sides
    double l_max_mean = 0;  // meters, mean of longer bbox sides
    long building_count = 0;
};

struct DepthSelection {
    int depth = 0;
    double log2_value = 0;  // log2((l_min+l_max)/(2r)) before flooring
    bool clamped = false;
};

struct ComponentBox {
    int min_row = 0, max_row = 0, min_col = 0, max_col = 0;  // inclusive
    int height_px() const { return max_row - min_row + 1; }
    int width_px() const { return max_col - min_col + 1; }
};

// Connected components of a binary mask under 8-connectivity.
std::vector<ComponentBox> component_boxes(const std::uint8_t* mask, int h, int w);

// Mean shorter/longer bounding-box side lengths, in meters, over every
// connected component in every mask of the batch.
BuildingLengthStats building_length_stats(const MaskBatch& masks, ResolutionSpec res);

// Encoder depth at which to inject the perturbation:
// d = floor(log2((l_min_mean + l_max_mean) / (2 r))). When max_depth > 0 the
// result is clamped into [1, max_depth] and the clamp is flagged.
DepthSelection select_perturbation_depth(ResolutionSpec res, const BuildingLengthStats& stats,
                                         int max_depth = 0);

}  // namespace foct
