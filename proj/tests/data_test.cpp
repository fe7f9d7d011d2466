#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "foct/data.hpp"
#include "foct/geometry.hpp"
#include "foct/png_io.hpp"
#include "foct/rng.hpp"

using namespace foct;
namespace fs = std::filesystem;

namespace {

SyntheticSceneSpec small_spec() {
    SyntheticSceneSpec spec;
    spec.patch_size = 32;
    spec.resolution = 1.0;
    spec.side_min_m = 4.0;
    spec.side_max_m = 8.0;
    spec.buildings_min = 2;
    spec.buildings_max = 4;
    spec.seed = 11;
    return spec;
}

fs::path fresh_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("png io: rgb and gray round-trip exactly") {
    const fs::path dir = fresh_dir("foct_png_test");
    fs::create_directories(dir);
    Rng rng(1);
    std::vector<std::uint8_t> rgb(5 * 7 * 3), gray(5 * 7);
    for (auto& v : rgb) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    for (auto& v : gray) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png_rgb8((dir / "a.png").string(), 7, 5, rgb.data());
    write_png_gray8((dir / "b.png").string(), 7, 5, gray.data());
    auto a = read_png((dir / "a.png").string());
    CHECK(a.width == 7);
    CHECK(a.height == 5);
    CHECK(a.channels == 3);
    CHECK(a.data == rgb);
    auto b = read_png((dir / "b.png").string());
    CHECK(b.channels == 1);
    CHECK(b.data == gray);
    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), std::runtime_error);
    std::ofstream junk(dir / "junk.png");
    junk << "not a png";
    junk.close();
    CHECK_THROWS_AS(read_png((dir / "junk.png").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("scenes: pure function of spec and index") {
    auto spec = small_spec();
    Patch a = generate_scene(spec, 3);
    Patch b = generate_scene(spec, 3);
    CHECK(a.image == b.image);
    CHECK(a.mask == b.mask);
    Patch c = generate_scene(spec, 4);
    CHECK(a.mask != c.mask);
    auto spec2 = spec;
    spec2.seed = 12;
    Patch d = generate_scene(spec2, 3);
    CHECK(a.image != d.image);
}

TEST_CASE("scenes: building count and footprint sizes follow the spec") {
    auto spec = small_spec();
    for (long ix = 0; ix < 12; ++ix) {
        Patch p = generate_scene(spec, ix);
        for (std::uint8_t v : p.mask) CHECK(v <= 1);
        auto boxes = component_boxes(p.mask.data(), spec.patch_size, spec.patch_size);
        CHECK(boxes.size() >= static_cast<std::size_t>(spec.buildings_min));
        CHECK(boxes.size() <= static_cast<std::size_t>(spec.buildings_max));
        for (const auto& bx : boxes) {
            // sides in meters within the configured range (rounding slack 0.5 px)
            CHECK(bx.height_px() * spec.resolution >= spec.side_min_m - 0.5);
            CHECK(bx.height_px() * spec.resolution <= spec.side_max_m + 0.5);
            CHECK(bx.width_px() * spec.resolution >= spec.side_min_m - 0.5);
            CHECK(bx.width_px() * spec.resolution <= spec.side_max_m + 0.5);
        }
    }
}

TEST_CASE("scenes: composite footprints stay within the union box") {
    auto spec = small_spec();
    spec.composite = true;
    spec.patch_size = 48;
    int non_rect = 0;
    for (long ix = 0; ix < 10; ++ix) {
        Patch p = generate_scene(spec, ix);
        auto boxes = component_boxes(p.mask.data(), spec.patch_size, spec.patch_size);
        CHECK(boxes.size() >= static_cast<std::size_t>(spec.buildings_min));
        long area = 0;
        for (std::uint8_t v : p.mask) area += v;
        long boxarea = 0;
        for (const auto& bx : boxes)
            boxarea += static_cast<long>(bx.height_px()) * bx.width_px();
        CHECK(area <= boxarea);
        if (area < boxarea) ++non_rect;  // some union is not a plain rectangle
    }
    CHECK(non_rect > 0);
}

TEST_CASE("scenes: spec validation") {
    auto ok = small_spec();
    CHECK_NOTHROW(ok.validate());
    auto broken = [&](auto mut) {
        auto s = small_spec();
        mut(s);
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    };
    broken([](SyntheticSceneSpec& s) { s.resolution = 0; });
    broken([](SyntheticSceneSpec& s) { s.patch_size = 4; });
    broken([](SyntheticSceneSpec& s) { s.buildings_min = 5; });  // > max
    broken([](SyntheticSceneSpec& s) { s.buildings_min = -1; });
    broken([](SyntheticSceneSpec& s) { s.side_min_m = 0; });
    broken([](SyntheticSceneSpec& s) { s.side_min_m = 9; });  // > side_max
    broken([](SyntheticSceneSpec& s) { s.background_noise_std = -0.1; });
    broken([](SyntheticSceneSpec& s) { s.intensity_contrast = -0.5; });
}

TEST_CASE("ratio parsing") {
    auto r = parse_ratio("1:10");
    CHECK(r.labeled_parts == 1);
    CHECK(r.unlabeled_parts == 10);
    CHECK(r.tag() == "1:10");
    auto q = parse_ratio("3:7");
    CHECK(q.labeled_parts == 3);
    CHECK(q.unlabeled_parts == 7);
    for (const char* bad : {"", "abc", "1:", ":5", "0:3", "1:0", "-1:2", "2"})
        CHECK_THROWS_AS(parse_ratio(bad), std::invalid_argument);
}

TEST_CASE("splits: ratio arithmetic on the training pool") {
    // pool of 660 at 1:10 -> 60 labeled, 600 unlabeled
    auto s = split_dataset_counts(660, {1, 10}, 0, 0, 5);
    CHECK(s.labeled.size() == 60);
    CHECK(s.unlabeled.size() == 600);
    CHECK(s.val.empty());
    CHECK(s.test.empty());

    auto t = split_dataset_counts(850, {1, 10}, 100, 150, 5);
    CHECK(t.val.size() == 100);
    CHECK(t.test.size() == 150);
    CHECK(t.labeled.size() + t.unlabeled.size() == 600);
    CHECK(t.labeled.size() == 55);  // round(600 / 11)

    // labeled never collapses to zero
    auto u = split_dataset_counts(12, {1, 100}, 0, 0, 1);
    CHECK(u.labeled.size() == 1);
    CHECK(u.unlabeled.size() == 11);
}

TEST_CASE("splits: partition the index range exactly") {
    auto s = split_dataset_counts(100, {1, 4}, 10, 15, 9);
    std::set<int> all;
    for (const auto* part : {&s.labeled, &s.unlabeled, &s.val, &s.test}) {
        CHECK(std::is_sorted(part->begin(), part->end()));
        for (int i : *part) {
            CHECK(all.insert(i).second);  // disjoint
            CHECK(i >= 0);
            CHECK(i < 100);
        }
    }
    CHECK(all.size() == 100);

    auto again = split_dataset_counts(100, {1, 4}, 10, 15, 9);
    CHECK(again.labeled == s.labeled);
    CHECK(again.test == s.test);
    auto other = split_dataset_counts(100, {1, 4}, 10, 15, 10);
    CHECK(other.labeled != s.labeled);
}

TEST_CASE("splits: fraction wrapper and validation") {
    auto s = split_dataset(200, {1, 1}, 0.1, 0.15, 3);
    CHECK(s.val.size() == 20);
    CHECK(s.test.size() == 30);
    CHECK(s.labeled.size() == 75);
    CHECK_THROWS_AS(split_dataset(100, {1, 1}, 0.6, 0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(100, {1, 1}, -0.1, 0.2, 3), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset_counts(10, {1, 1}, 5, 4, 3), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset_counts(10, {1, 1}, -1, 2, 3), std::invalid_argument);
}

TEST_CASE("dataset: in-memory synthetic batches") {
    auto spec = small_spec();
    Dataset ds = Dataset::synthetic(spec, 10, 2, 3, {1, 4}, 7);
    CHECK(ds.size() == 15);
    CHECK(ds.patch_size() == 32);
    CHECK(ds.resolution() == 1.0);
    CHECK(ds.id(0) == "p00000");
    CHECK(ds.id(14) == "p00014");
    CHECK(ds.split().val.size() == 2);
    CHECK(ds.split().test.size() == 3);
    CHECK(ds.split().labeled.size() == 2);
    CHECK(ds.split().unlabeled.size() == 8);

    auto batch = ds.image_batch({0, 3, 5});
    CHECK(batch.n == 3);
    CHECK(batch.c == 3);
    CHECK(batch.h == 32);
    for (float v : batch.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
    auto masks = ds.mask_batch({1, 2});
    CHECK(masks.n == 2);
    for (auto v : masks.data) CHECK(v <= 1);
    CHECK_THROWS_AS(ds.image_batch({}), std::invalid_argument);
    CHECK_THROWS_AS(ds.mask_batch({}), std::invalid_argument);
}

TEST_CASE("dataset: mask reads are counted per item") {
    auto spec = small_spec();
    Dataset ds = Dataset::synthetic(spec, 6, 1, 1, {1, 2}, 3);
    CHECK(ds.mask_reads(2) == 0);
    ds.image_batch({2});  // images do not touch masks
    CHECK(ds.mask_reads(2) == 0);
    ds.mask_batch({2});
    CHECK(ds.mask_reads(2) == 1);
    ds.mask(2);
    ds.mask(2);
    CHECK(ds.mask_reads(2) == 3);
    CHECK(ds.mask_reads(3) == 0);
}

TEST_CASE("dataset: write and load round-trips every pixel") {
    auto spec = small_spec();
    const fs::path dir = fresh_dir("foct_roundtrip_test");
    DatasetSplit written = write_dataset(dir.string(), spec, 8, 2, 2, {1, 3}, 21);
    Dataset mem = Dataset::synthetic(spec, 8, 2, 2, {1, 3}, 21);
    Dataset disk = Dataset::load(dir.string());
    CHECK(disk.size() == mem.size());
    CHECK(disk.patch_size() == mem.patch_size());
    CHECK(disk.resolution() == mem.resolution());
    CHECK(disk.split().labeled == written.labeled);
    CHECK(disk.split().unlabeled == mem.split().unlabeled);
    CHECK(disk.split().val == mem.split().val);
    CHECK(disk.split().test == mem.split().test);
    for (int i = 0; i < disk.size(); ++i) {
        CHECK(disk.image(i) == mem.image(i));
        CHECK(disk.mask(i) == mem.mask(i));
        CHECK(disk.has_mask(i));
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset: unlabeled masks may be absent, annotated ones may not") {
    auto spec = small_spec();
    const fs::path dir = fresh_dir("foct_missing_mask_test");
    write_dataset(dir.string(), spec, 8, 2, 2, {1, 3}, 21);
    Dataset probe = Dataset::load(dir.string());
    const int unl = probe.split().unlabeled.at(0);
    const int lab = probe.split().labeled.at(0);

    fs::remove(dir / "masks" / (probe.id(unl) + ".png"));
    Dataset ds = Dataset::load(dir.string());  // still loads
    CHECK_FALSE(ds.has_mask(unl));
    CHECK(ds.has_mask(lab));
    CHECK_THROWS_AS(ds.mask(unl), std::runtime_error);
    CHECK(ds.mask_reads(unl) == 1);  // the attempt itself is counted

    fs::remove(dir / "masks" / (probe.id(lab) + ".png"));
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("dataset: load rejects broken directories") {
    const fs::path dir = fresh_dir("foct_badload_test");
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    fs::create_directories(dir);
    std::ofstream(dir / "manifest.json") << "{broken";
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    std::ofstream(dir / "manifest.json") << "{\"patch_size\": 32}";
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    // valid manifest but missing image files
    std::ofstream(dir / "manifest.json")
        << R"({"resolution_m_per_px": 1.0, "patch_size": 32, "ids": ["p00000"],
             "split": {"labeled": ["p00000"], "unlabeled": [], "val": [], "test": []}})";
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    // split references an unknown id
    std::ofstream(dir / "manifest.json")
        << R"({"resolution_m_per_px": 1.0, "patch_size": 32, "ids": ["p00000"],
             "split": {"labeled": ["zzz"], "unlabeled": [], "val": [], "test": []}})";
    CHECK_THROWS_AS(Dataset::load(dir.string()), std::runtime_error);
    fs::remove_all(dir);
}
