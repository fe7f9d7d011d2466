#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foct/rng.hpp"
#include "foct/tensor.hpp"

namespace foct {

struct SyntheticSceneSpec {
    double resolution = 1.0;  // meters per pixel
    int patch_size = 128;
    int buildings_min = 3;
    int buildings_max = 7;
    double side_min_m = 10.0;
    double side_max_m = 20.0;
    double intensity_contrast = 0.35;   // magnitude of per-building brightness offset
    double background_noise_std = 0.10;
    double shadow_strength = 0.45;      // depth of smooth multiplicative illumination blobs
    bool composite = false;             // union of two rectangles per building
    std::uint64_t seed = 0;

    void validate() const;
};

struct Patch {
    std::vector<std::uint8_t> image;  // planar RGB, 3*h*w
    std::vector<std::uint8_t> mask;   // h*w, values {0,1}
};

// Renders one synthetic footprint patch; pure function of (spec, index).
Patch generate_scene(const SyntheticSceneSpec& spec, long index);

struct SplitRatio {
    int labeled_parts = 1;
    int unlabeled_parts = 10;
    std::string tag() const {
        return std::to_string(labeled_parts) + ":" + std::to_string(unlabeled_parts);
    }
};

SplitRatio parse_ratio(const std::string& s);  // "1:10" and friends

struct DatasetSplit {
    std::vector<int> labeled, unlabeled, val, test;
};

// Randomly partitions [0, n) into labeled/unlabeled/val/test with exact val
// and test counts; the remaining pool is split labeled:unlabeled per ratio
// (rounded, labeled at least 1).
DatasetSplit split_dataset_counts(int n, SplitRatio ratio, int n_val, int n_test,
                                  std::uint64_t seed);

// Fraction-based wrapper: val/test counts are round(frac * n).
DatasetSplit split_dataset(int n, SplitRatio ratio, double val_frac, double test_frac,
                           std::uint64_t seed);

// Patch collection plus split, either generated in memory or loaded from a
// directory. Mask access is lazy and counted so tests can prove the training
// loop never touches unlabeled annotations.
class Dataset {
public:
    static Dataset synthetic(const SyntheticSceneSpec& spec, int n_pool, int n_val, int n_test,
                             SplitRatio ratio, std::uint64_t split_seed);
    static Dataset load(const std::string& dir);

    int size() const { return static_cast<int>(ids_.size()); }
    int patch_size() const { return patch_size_; }
    double resolution() const { return resolution_; }
    const DatasetSplit& split() const { return split_; }
    const std::string& id(int i) const { return ids_.at(i); }

    const std::vector<std::uint8_t>& image(int i) const { return images_.at(i); }
    bool has_mask(int i) const;
    const std::vector<std::uint8_t>& mask(int i) const;  // loads on demand, counts the read
    std::size_t mask_reads(int i) const { return mask_reads_.at(i); }

    Tensor<float> image_batch(const std::vector<int>& idx) const;
    MaskBatch mask_batch(const std::vector<int>& idx) const;

private:
    int patch_size_ = 0;
    double resolution_ = 1.0;
    std::vector<std::string> ids_;
    std::vector<std::vector<std::uint8_t>> images_;
    mutable std::vector<std::vector<std::uint8_t>> masks_;
    std::vector<std::string> mask_paths_;  // empty entries for in-memory datasets
    mutable std::vector<std::uint8_t> mask_loaded_;
    mutable std::vector<std::size_t> mask_reads_;
    DatasetSplit split_;
};

// Generates n_pool + n_val + n_test patches, writes the on-disk layout
// (images/, masks/, manifest.json) and returns the split that was written.
DatasetSplit write_dataset(const std::string& dir, const SyntheticSceneSpec& spec, int n_pool,
                           int n_val, int n_test, SplitRatio ratio, std::uint64_t split_seed);

}  // namespace foct
