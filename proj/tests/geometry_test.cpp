#include <doctest.h>

#include <cmath>
#include <vector>

#include "foct/geometry.hpp"

using namespace foct;

namespace {

MaskBatch from_rows(const std::vector<std::string>& rows) {
    MaskBatch m(1, static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.h; ++r)
        for (int c = 0; c < m.w; ++c) m.at(0, r, c) = rows[r][c] == '#' ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("components: rectangles come back with exact boxes") {
    auto m = from_rows({
        "........",
        ".###....",
        ".###..#.",
        "......#.",
        "........",
    });
    auto boxes = component_boxes(m.data.data(), m.h, m.w);
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[0].min_row == 1);
    CHECK(boxes[0].max_row == 2);
    CHECK(boxes[0].min_col == 1);
    CHECK(boxes[0].max_col == 3);
    CHECK(boxes[0].height_px() == 2);
    CHECK(boxes[0].width_px() == 3);
    CHECK(boxes[1].height_px() == 2);
    CHECK(boxes[1].width_px() == 1);
}

TEST_CASE("components: diagonal touch merges under 8-connectivity") {
    auto m = from_rows({
        "#..",
        ".#.",
        "..#",
    });
    auto boxes = component_boxes(m.data.data(), m.h, m.w);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].height_px() == 3);
    CHECK(boxes[0].width_px() == 3);
}

TEST_CASE("components: empty mask, full mask, single pixel") {
    auto empty = from_rows({"...", "..."});
    CHECK(component_boxes(empty.data.data(), empty.h, empty.w).empty());
    auto full = from_rows({"###", "###"});
    auto fb = component_boxes(full.data.data(), full.h, full.w);
    REQUIRE(fb.size() == 1);
    CHECK(fb[0].height_px() == 2);
    CHECK(fb[0].width_px() == 3);
    auto dot = from_rows({".#."});
    auto db = component_boxes(dot.data.data(), dot.h, dot.w);
    REQUIRE(db.size() == 1);
    CHECK(db[0].height_px() == 1);
    CHECK(db[0].width_px() == 1);
}

TEST_CASE("building stats: averages shorter and longer sides in meters") {
    // one 2x3-px box and one 1x2-px box, at 2 m per pixel
    auto m = from_rows({
        "........",
        ".###....",
        ".###..##",
        "........",
    });
    auto stats = building_length_stats(m, {2.0});
    CHECK(stats.building_count == 2);
    // boxes: (2x3)px -> short 4 m, long 6 m; (1x2)px -> short 2 m, long 4 m
    CHECK(stats.l_min_mean == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(stats.l_max_mean == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("building stats: multi-mask batches pool components") {
    MaskBatch m(2, 4, 4);
    m.at(0, 1, 1) = 1;  // 1x1
    m.at(1, 0, 0) = 1;  // 1x2
    m.at(1, 0, 1) = 1;
    auto stats = building_length_stats(m, {1.0});
    CHECK(stats.building_count == 2);
    CHECK(stats.l_min_mean == doctest::Approx(1.0));
    CHECK(stats.l_max_mean == doctest::Approx(1.5));
}

TEST_CASE("building stats: validation") {
    MaskBatch blank(1, 4, 4);
    CHECK_THROWS_AS(building_length_stats(blank, {1.0}), std::invalid_argument);
    MaskBatch bad(1, 2, 2);
    bad.at(0, 0, 0) = 2;
    CHECK_THROWS_AS(building_length_stats(bad, {1.0}), std::invalid_argument);
    MaskBatch ok(1, 2, 2);
    ok.at(0, 0, 0) = 1;
    CHECK_THROWS_AS(building_length_stats(ok, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(building_length_stats(ok, {-1.0}), std::invalid_argument);
}

TEST_CASE("depth selection: floor of the log-scale building span") {
    // spans 17-19 m at 3 m/px: (17+19)/6 = 6 px -> log2 = 2.585 -> depth 2
    auto a = select_perturbation_depth({3.0}, {17.0, 19.0, 5});
    CHECK(a.depth == 2);
    CHECK(a.log2_value == doctest::Approx(std::log2(6.0)).epsilon(1e-12));
    CHECK_FALSE(a.clamped);

    // 12-16 m at 0.3 m/px: 28/0.6 = 46.67 px -> log2 = 5.544 -> depth 5
    auto b = select_perturbation_depth({0.3}, {12.0, 16.0, 9});
    CHECK(b.depth == 5);

    // 14-17 m at 1 m/px: 31/2 = 15.5 px -> log2 = 3.954 -> depth 3,
    // sitting just under the next integer
    auto c = select_perturbation_depth({1.0}, {14.0, 17.0, 4});
    CHECK(c.depth == 3);
    CHECK(c.log2_value == doctest::Approx(3.9541963104).epsilon(1e-9));
    CHECK(c.log2_value - std::floor(c.log2_value) > 0.9);
}

TEST_CASE("depth selection: exact powers of two do not round down") {
    // span exactly 8 px -> log2 = 3.0 must give depth 3, not 2
    auto s = select_perturbation_depth({1.0}, {8.0, 8.0, 1});
    CHECK(s.depth == 3);
    CHECK(s.log2_value == 3.0);
    // 0.5*(6+10)/1 = 8 again but via differing sides
    auto t = select_perturbation_depth({1.0}, {6.0, 10.0, 2});
    CHECK(t.depth == 3);
}

TEST_CASE("depth selection: clamping into the model range") {
    auto deep = select_perturbation_depth({0.25}, {30.0, 34.0, 3}, 5);
    CHECK(deep.depth == 5);  // raw depth 7 clamped down
    CHECK(deep.clamped);
    auto shallow = select_perturbation_depth({1.0}, {1.0, 1.5, 2}, 5);
    CHECK(shallow.depth == 1);  // raw depth 0 clamped up
    CHECK(shallow.clamped);
    auto inside = select_perturbation_depth({1.0}, {14.0, 17.0, 4}, 5);
    CHECK_FALSE(inside.clamped);
    // without a limit the raw value is returned
    auto raw = select_perturbation_depth({0.25}, {30.0, 34.0, 3});
    CHECK(raw.depth == 7);
}

TEST_CASE("depth selection: validation") {
    CHECK_THROWS_AS(select_perturbation_depth({0.0}, {5, 6, 1}), std::invalid_argument);
    CHECK_THROWS_AS(select_perturbation_depth({1.0}, {5, 6, 0}), std::invalid_argument);
    CHECK_THROWS_AS(select_perturbation_depth({1.0}, {0, 6, 1}), std::invalid_argument);
    CHECK_THROWS_AS(select_perturbation_depth({1.0}, {7, 6, 1}), std::invalid_argument);
    // sub-pixel building span has no valid depth
    CHECK_THROWS_AS(select_perturbation_depth({10.0}, {4, 5, 1}), std::domain_error);
}
