#include "foct/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace foct {

std::vector<ComponentBox> component_boxes(const std::uint8_t* mask, int h, int w) {
    std::vector<ComponentBox> boxes;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
    std::vector<int> stack;
    for (int r0 = 0; r0 < h; ++r0) {
        for (int c0 = 0; c0 < w; ++c0) {
            const int start = r0 * w + c0;
            if (!mask[start] || seen[start]) continue;
            ComponentBox box{r0, r0, c0, c0};
            seen[start] = 1;
            stack.assign(1, start);
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cr = cur / w, cc = cur % w;
                box.min_row = std::min(box.min_row, cr);
                box.max_row = std::max(box.max_row, cr);
                box.min_col = std::min(box.min_col, cc);
                box.max_col = std::max(box.max_col, cc);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (!dr && !dc) continue;
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        const int ni = nr * w + nc;
                        if (mask[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.push_back(ni);
                        }
                    }
                }
            }
            boxes.push_back(box);
        }
    }
    return boxes;
}

BuildingLengthStats building_length_stats(const MaskBatch& masks, ResolutionSpec res) {
    if (res.r <= 0) throw std::invalid_argument("building_length_stats: resolution must be > 0");
    for (std::uint8_t v : masks.data)
        if (v > 1) throw std::invalid_argument("building_length_stats: mask is not binary");
    double sum_min = 0, sum_max = 0;
    long count = 0;
    const std::size_t plane = static_cast<std::size_t>(masks.h) * masks.w;
    for (int in = 0; in < masks.n; ++in) {
        for (const ComponentBox& b :
             component_boxes(masks.data.data() + in * plane, masks.h, masks.w)) {
            const double a = b.height_px() * res.r;
            const double bb = b.width_px() * res.r;
            sum_min += std::min(a, bb);
            sum_max += std::max(a, bb);
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("building_length_stats: no foreground component in any mask");
    return {sum_min / count, sum_max / count, count};
}

DepthSelection select_perturbation_depth(ResolutionSpec res, const BuildingLengthStats& stats,
                                         int max_depth) {
    if (res.r <= 0) throw std::invalid_argument("select_perturbation_depth: resolution must be > 0");
    if (stats.building_count <= 0)
        throw std::invalid_argument("select_perturbation_depth: no buildings in stats");
    if (!(stats.l_min_mean > 0 && stats.l_min_mean <= stats.l_max_mean))
        throw std::invalid_argument("select_perturbation_depth: need 0 < l_min_mean <= l_max_mean");
    const double arg = (stats.l_min_mean + stats.l_max_mean) / (2.0 * res.r);
    if (arg < 1.0)
        throw std::domain_error("select_perturbation_depth: mean building span " +
                                std::to_string(arg) +
                                " px is below one pixel; depth would be negative");
    double x = std::log2(arg);
    // snap values a hair under an integer (floor(1.9999999) artifacts)
    const double rounded = std::round(x);
    if (std::abs(x - rounded) < 1e-9) x = rounded;
    DepthSelection sel;
    sel.log2_value = x;
    sel.depth = static_cast<int>(std::floor(x));
    if (max_depth > 0) {
        const int clamped = std::clamp(sel.depth, 1, max_depth);
        sel.clamped = clamped != sel.depth;
        sel.depth = clamped;
    }
    return sel;
}

}  // namespace foct
