#include "foct/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "foct/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace foct {

namespace {

constexpr std::uint64_t kStreamScene = 0x5C;
constexpr std::uint64_t kStreamSplit = 0x59;

std::uint8_t to_u8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

struct Rect {
    int r0, c0, r1, c1;  // inclusive
};

bool fits(const Rect& r, int hw) {
    return r.r0 >= 0 && r.c0 >= 0 && r.r1 < hw && r.c1 < hw && r.r0 <= r.r1 && r.c0 <= r.c1;
}

// true when the rectangle, grown by one pixel, touches occupied cells; the
// margin keeps components apart under 8-connectivity
bool collides(const std::vector<std::uint8_t>& occ, int hw, const Rect& r) {
    for (int y = std::max(0, r.r0 - 1); y <= std::min(hw - 1, r.r1 + 1); ++y)
        for (int x = std::max(0, r.c0 - 1); x <= std::min(hw - 1, r.c1 + 1); ++x)
            if (occ[y * hw + x]) return true;
    return false;
}

void stamp(std::vector<std::uint8_t>& grid, int hw, const Rect& r, std::uint8_t v) {
    for (int y = r.r0; y <= r.r1; ++y)
        for (int x = r.c0; x <= r.c1; ++x) grid[y * hw + x] = v;
}

}  // namespace

void SyntheticSceneSpec::validate() const {
    if (resolution <= 0) throw std::invalid_argument("scene spec: resolution must be > 0");
    if (patch_size < 8) throw std::invalid_argument("scene spec: patch_size too small");
    if (buildings_min < 0 || buildings_max < buildings_min)
        throw std::invalid_argument("scene spec: bad buildings_per_patch range");
    if (!(side_min_m > 0 && side_min_m <= side_max_m))
        throw std::invalid_argument("scene spec: bad side_length_range");
    if (background_noise_std < 0 || intensity_contrast < 0 || shadow_strength < 0)
        throw std::invalid_argument("scene spec: negative contrast, noise, or shadow");
}

Patch generate_scene(const SyntheticSceneSpec& spec, long index) {
    spec.validate();
    const int hw = spec.patch_size;
    Rng rng(derive_seed(spec.seed, kStreamScene, static_cast<std::uint64_t>(index)));

    Patch patch;
    patch.mask.assign(static_cast<std::size_t>(hw) * hw, 0);
    std::vector<std::uint8_t> occ(patch.mask.size(), 0);

    // background: per-channel base level with gentle tints
    const double base = rng.uniform(0.30, 0.50);
    double base_ch[3];
    for (double& b : base_ch) b = base + rng.uniform(-0.03, 0.03);

    struct Placed {
        Rect a, b;     // b unused unless composite
        bool has_b;
        double level[3];
    };
    std::vector<Placed> placed;

    const int want = spec.buildings_max > 0
                         ? static_cast<int>(rng.uniform_int(spec.buildings_min, spec.buildings_max))
                         : 0;
    int attempts = 0;
    while (static_cast<int>(placed.size()) < want) {
        if (++attempts > 1000)
            throw std::runtime_error("generate_scene: could not place " + std::to_string(want) +
                                     " buildings after 1000 attempts");
        const double wm = rng.uniform(spec.side_min_m, spec.side_max_m);
        const double hm = rng.uniform(spec.side_min_m, spec.side_max_m);
        const int wp = static_cast<int>(std::lround(wm / spec.resolution));
        const int hp = static_cast<int>(std::lround(hm / spec.resolution));
        if (wp < 1 || hp < 1) continue;  // below one pixel
        if (wp > hw - 2 || hp > hw - 2) continue;
        const int r0 = static_cast<int>(rng.uniform_int(1, hw - 1 - hp));
        const int c0 = static_cast<int>(rng.uniform_int(1, hw - 1 - wp));
        Rect rect{r0, c0, r0 + hp - 1, c0 + wp - 1};
        Placed p{};
        p.a = rect;
        p.has_b = false;
        if (spec.composite) {
            // second rectangle overlapping the first: an L- or T-like union
            const int wp2 = std::max(1, wp / 2 + static_cast<int>(rng.uniform_int(0, wp / 2)));
            const int hp2 = std::max(1, hp / 2 + static_cast<int>(rng.uniform_int(0, hp / 2)));
            Rect b{rect.r0 + static_cast<int>(rng.uniform_int(0, hp - 1)),
                   rect.c0 + static_cast<int>(rng.uniform_int(0, wp - 1)), 0, 0};
            b.r1 = b.r0 + hp2 - 1;
            b.c1 = b.c0 + wp2 - 1;
            if (!fits(b, hw)) continue;
            p.b = b;
            p.has_b = true;
        }
        if (collides(occ, hw, p.a) || (p.has_b && collides(occ, hw, p.b))) continue;
        // brightness offset: buildings sit above the background, with a wide
        // low tail so weak buildings grade toward the background appearance
        const double mag = spec.intensity_contrast * rng.uniform(0.5, 1.3);
        for (int ch = 0; ch < 3; ++ch)
            p.level[ch] = base_ch[ch] + mag + rng.uniform(-0.02, 0.02);
        stamp(occ, hw, p.a, 1);
        if (p.has_b) stamp(occ, hw, p.b, 1);
        stamp(patch.mask, hw, p.a, 1);
        if (p.has_b) stamp(patch.mask, hw, p.b, 1);
        placed.push_back(p);
    }

    // render planar RGB: per-pixel levels plus white noise
    patch.image.assign(static_cast<std::size_t>(3) * hw * hw, 0);
    std::vector<double> level(static_cast<std::size_t>(3) * hw * hw);
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t px = 0; px < patch.mask.size(); ++px)
            level[ch * patch.mask.size() + px] = base_ch[ch];
    for (const Placed& p : placed)
        for (int ch = 0; ch < 3; ++ch) {
            std::vector<double>::iterator plane = level.begin() + ch * patch.mask.size();
            for (int y = p.a.r0; y <= p.a.r1; ++y)
                for (int x = p.a.c0; x <= p.a.c1; ++x) plane[y * hw + x] = p.level[ch];
            if (p.has_b)
                for (int y = p.b.r0; y <= p.b.r1; ++y)
                    for (int x = p.b.c0; x <= p.b.c1; ++x) plane[y * hw + x] = p.level[ch];
        }
    // smooth multiplicative illumination: a few soft shadow or glare blobs,
    // the dominant appearance nuisance across patches
    std::vector<double> illum(patch.mask.size(), 1.0);
    if (spec.shadow_strength > 0) {
        const int blobs = 1 + static_cast<int>(rng.uniform_int(0, 2));
        for (int b = 0; b < blobs; ++b) {
            const double cy = rng.uniform(0.0, hw);
            const double cx = rng.uniform(0.0, hw);
            const double sig = rng.uniform(0.25, 0.6) * hw;
            const double amp = rng.uniform(-spec.shadow_strength, spec.shadow_strength);
            for (int y = 0; y < hw; ++y)
                for (int x = 0; x < hw; ++x) {
                    const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    illum[static_cast<std::size_t>(y) * hw + x] *=
                        1.0 + amp * std::exp(-d2 / (2.0 * sig * sig));
                }
        }
        for (double& m : illum) m = std::clamp(m, 0.25, 1.75);
    }

    for (std::size_t px = 0; px < patch.mask.size(); ++px) {
        // shared luminance noise plus a small independent per-channel part
        const double lum = rng.normal(0.0, spec.background_noise_std);
        for (int ch = 0; ch < 3; ++ch) {
            const double v = level[ch * patch.mask.size() + px] * illum[px] + lum +
                             rng.normal(0.0, spec.background_noise_std * 0.35);
            patch.image[ch * patch.mask.size() + px] = to_u8(v);
        }
    }
    return patch;
}

SplitRatio parse_ratio(const std::string& s) {
    const std::size_t colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= s.size())
        throw std::invalid_argument("ratio: expected <labeled>:<unlabeled>, got '" + s + "'");
    SplitRatio r;
    try {
        r.labeled_parts = std::stoi(s.substr(0, colon));
        r.unlabeled_parts = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("ratio: expected <labeled>:<unlabeled>, got '" + s + "'");
    }
    if (r.labeled_parts < 1 || r.unlabeled_parts < 1)
        throw std::invalid_argument("ratio: parts must be positive in '" + s + "'");
    return r;
}

DatasetSplit split_dataset_counts(int n, SplitRatio ratio, int n_val, int n_test,
                                  std::uint64_t seed) {
    if (n_val < 0 || n_test < 0) throw std::invalid_argument("split: negative val/test count");
    const int pool = n - n_val - n_test;
    if (pool < 2)
        throw std::invalid_argument("split: insufficient data (" + std::to_string(n) +
                                    " total leaves pool " + std::to_string(pool) + ")");
    const double frac =
        static_cast<double>(ratio.labeled_parts) / (ratio.labeled_parts + ratio.unlabeled_parts);
    int labeled = static_cast<int>(std::llround(pool * frac));
    labeled = std::clamp(labeled, 1, pool - 1);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, kStreamSplit));
    rng.shuffle(order.begin(), order.end());
    DatasetSplit split;
    split.labeled.assign(order.begin(), order.begin() + labeled);
    split.unlabeled.assign(order.begin() + labeled, order.begin() + pool);
    split.val.assign(order.begin() + pool, order.begin() + pool + n_val);
    split.test.assign(order.begin() + pool + n_val, order.end());
    for (std::vector<int>* s : {&split.labeled, &split.unlabeled, &split.val, &split.test})
        std::sort(s->begin(), s->end());
    return split;
}

DatasetSplit split_dataset(int n, SplitRatio ratio, double val_frac, double test_frac,
                           std::uint64_t seed) {
    if (val_frac < 0 || test_frac < 0 || val_frac + test_frac >= 1.0)
        throw std::invalid_argument("split: bad val/test fractions");
    const int n_val = static_cast<int>(std::llround(val_frac * n));
    const int n_test = static_cast<int>(std::llround(test_frac * n));
    return split_dataset_counts(n, ratio, n_val, n_test, seed);
}

bool Dataset::has_mask(int i) const {
    return mask_loaded_.at(i) || !mask_paths_.at(i).empty();
}

const std::vector<std::uint8_t>& Dataset::mask(int i) const {
    ++mask_reads_.at(i);
    if (!mask_loaded_.at(i)) {
        const std::string& path = mask_paths_.at(i);
        if (path.empty())
            throw std::runtime_error("dataset: no mask available for id " + ids_.at(i));
        PngImage img = read_png(path);
        if (img.channels != 1 || img.width != patch_size_ || img.height != patch_size_)
            throw std::runtime_error("dataset: mask size mismatch for id " + ids_.at(i));
        std::vector<std::uint8_t> m(img.data.size());
        for (std::size_t px = 0; px < m.size(); ++px) m[px] = img.data[px] >= 128 ? 1 : 0;
        masks_.at(i) = std::move(m);
        mask_loaded_.at(i) = 1;
    }
    return masks_.at(i);
}

Tensor<float> Dataset::image_batch(const std::vector<int>& idx) const {
    if (idx.empty()) throw std::invalid_argument("image_batch: empty index list");
    Tensor<float> out(static_cast<int>(idx.size()), 3, patch_size_, patch_size_);
    const std::size_t plane = static_cast<std::size_t>(patch_size_) * patch_size_;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const std::vector<std::uint8_t>& img = image(idx[b]);
        float* dst = out.data.data() + b * 3 * plane;
        for (std::size_t k = 0; k < 3 * plane; ++k)
            dst[k] = static_cast<float>(img[k]) * (1.0f / 255.0f);
    }
    return out;
}

MaskBatch Dataset::mask_batch(const std::vector<int>& idx) const {
    if (idx.empty()) throw std::invalid_argument("mask_batch: empty index list");
    MaskBatch out(static_cast<int>(idx.size()), patch_size_, patch_size_);
    const std::size_t plane = static_cast<std::size_t>(patch_size_) * patch_size_;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const std::vector<std::uint8_t>& m = mask(idx[b]);
        std::copy(m.begin(), m.end(), out.data.begin() + b * plane);
    }
    return out;
}

Dataset Dataset::synthetic(const SyntheticSceneSpec& spec, int n_pool, int n_val, int n_test,
                           SplitRatio ratio, std::uint64_t split_seed) {
    const int n = n_pool + n_val + n_test;
    Dataset ds;
    ds.patch_size_ = spec.patch_size;
    ds.resolution_ = spec.resolution;
    ds.split_ = split_dataset_counts(n, ratio, n_val, n_test, split_seed);
    ds.ids_.reserve(n);
    ds.images_.reserve(n);
    ds.masks_.reserve(n);
    char buf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "p%05d", i);
        ds.ids_.emplace_back(buf);
        Patch p = generate_scene(spec, i);
        ds.images_.push_back(std::move(p.image));
        ds.masks_.push_back(std::move(p.mask));
    }
    ds.mask_paths_.assign(n, std::string());
    ds.mask_loaded_.assign(n, 1);
    ds.mask_reads_.assign(n, 0);
    return ds;
}

DatasetSplit write_dataset(const std::string& dir, const SyntheticSceneSpec& spec, int n_pool,
                           int n_val, int n_test, SplitRatio ratio, std::uint64_t split_seed) {
    const int n = n_pool + n_val + n_test;
    const DatasetSplit split = split_dataset_counts(n, ratio, n_val, n_test, split_seed);
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");

    const int hw = spec.patch_size;
    const std::size_t plane = static_cast<std::size_t>(hw) * hw;
    std::vector<std::uint8_t> interleaved(3 * plane);
    std::vector<std::uint8_t> mask8(plane);
    std::vector<std::string> ids;
    char buf[16];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "p%05d", i);
        ids.emplace_back(buf);
        Patch p = generate_scene(spec, i);
        for (std::size_t px = 0; px < plane; ++px)
            for (int ch = 0; ch < 3; ++ch)
                interleaved[px * 3 + ch] = p.image[ch * plane + px];
        for (std::size_t px = 0; px < plane; ++px) mask8[px] = p.mask[px] ? 255 : 0;
        write_png_rgb8((fs::path(dir) / "images" / (ids.back() + ".png")).string(), hw, hw,
                       interleaved.data());
        write_png_gray8((fs::path(dir) / "masks" / (ids.back() + ".png")).string(), hw, hw,
                        mask8.data());
    }

    json manifest;
    manifest["resolution_m_per_px"] = spec.resolution;
    manifest["patch_size"] = spec.patch_size;
    manifest["ids"] = ids;
    json js;
    const auto names = [&](const std::vector<int>& v) {
        std::vector<std::string> out;
        out.reserve(v.size());
        for (int i : v) out.push_back(ids[i]);
        return out;
    };
    js["labeled"] = names(split.labeled);
    js["unlabeled"] = names(split.unlabeled);
    js["val"] = names(split.val);
    js["test"] = names(split.test);
    manifest["split"] = js;
    json gen;
    gen["buildings_min"] = spec.buildings_min;
    gen["buildings_max"] = spec.buildings_max;
    gen["side_min_m"] = spec.side_min_m;
    gen["side_max_m"] = spec.side_max_m;
    gen["intensity_contrast"] = spec.intensity_contrast;
    gen["background_noise_std"] = spec.background_noise_std;
    gen["shadow_strength"] = spec.shadow_strength;
    gen["composite"] = spec.composite;
    gen["seed"] = spec.seed;
    manifest["generator"] = gen;

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("write_dataset: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
    return split;
}

Dataset Dataset::load(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in) throw std::runtime_error("dataset: missing manifest.json in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset: unparseable manifest.json: " + std::string(e.what()));
    }
    Dataset ds;
    try {
        ds.resolution_ = manifest.at("resolution_m_per_px").get<double>();
        ds.patch_size_ = manifest.at("patch_size").get<int>();
        ds.ids_ = manifest.at("ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset: manifest missing field: " + std::string(e.what()));
    }
    if (ds.resolution_ <= 0 || ds.patch_size_ <= 0 || ds.ids_.empty())
        throw std::runtime_error("dataset: manifest has invalid values");

    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < ds.ids_.size(); ++i) index[ds.ids_[i]] = static_cast<int>(i);
    const auto resolve = [&](const char* key) {
        std::vector<int> out;
        for (const auto& name : manifest.at("split").at(key).get<std::vector<std::string>>()) {
            const auto it = index.find(name);
            if (it == index.end())
                throw std::runtime_error("dataset: split id '" + name + "' not in ids");
            out.push_back(it->second);
        }
        return out;
    };
    try {
        ds.split_.labeled = resolve("labeled");
        ds.split_.unlabeled = resolve("unlabeled");
        ds.split_.val = resolve("val");
        ds.split_.test = resolve("test");
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset: manifest split malformed: " + std::string(e.what()));
    }

    const int n = ds.size();
    ds.images_.resize(n);
    ds.masks_.resize(n);
    ds.mask_paths_.assign(n, std::string());
    ds.mask_loaded_.assign(n, 0);
    ds.mask_reads_.assign(n, 0);
    const std::size_t plane = static_cast<std::size_t>(ds.patch_size_) * ds.patch_size_;
    for (int i = 0; i < n; ++i) {
        const fs::path img_path = root / "images" / (ds.ids_[i] + ".png");
        PngImage img = read_png(img_path.string());
        if (img.channels != 3 || img.width != ds.patch_size_ || img.height != ds.patch_size_)
            throw std::runtime_error("dataset: image size/channel mismatch for id " + ds.ids_[i]);
        std::vector<std::uint8_t> planar(3 * plane);
        for (std::size_t px = 0; px < plane; ++px)
            for (int ch = 0; ch < 3; ++ch) planar[ch * plane + px] = img.data[px * 3 + ch];
        ds.images_[i] = std::move(planar);
        const fs::path mask_path = root / "masks" / (ds.ids_[i] + ".png");
        if (fs::exists(mask_path)) ds.mask_paths_[i] = mask_path.string();
    }
    // annotations must exist wherever training or evaluation will read them
    for (const std::vector<int>* part : {&ds.split_.labeled, &ds.split_.val, &ds.split_.test})
        for (int i : *part)
            if (ds.mask_paths_[i].empty())
                throw std::runtime_error("dataset: missing mask for id " + ds.ids_[i] +
                                         " in an annotated split");
    return ds;
}

}  // namespace foct
