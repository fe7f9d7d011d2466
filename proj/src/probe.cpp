#include "foct/probe.hpp"

namespace foct {

std::vector<std::uint8_t> boundary_band(const std::uint8_t* mask, int h, int w, int radius) {
    std::vector<std::uint8_t> band(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t v = mask[y * w + x];
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    edge = mask[ny * w + nx] != v;
                }
            if (edge) band[y * w + x] = 1;
        }
    }
    // dilate the edge set (radius - 1) times to widen the band
    std::vector<std::uint8_t> cur = band;
    for (int it = 1; it < radius; ++it) {
        std::vector<std::uint8_t> next = cur;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (cur[y * w + x]) continue;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        if (cur[ny * w + nx]) {
                            next[y * w + x] = 1;
                            dy = dx = 2;
                        }
                    }
            }
        cur.swap(next);
    }
    return cur;
}

ProbeBandStats band_stats(const float* variation, const std::uint8_t* mask, int h, int w,
                          int radius) {
    const std::vector<std::uint8_t> band = boundary_band(mask, h, w, radius);
    ProbeBandStats s;
    double bsum = 0, isum = 0;
    for (std::size_t i = 0; i < band.size(); ++i) {
        if (band[i]) {
            bsum += variation[i];
            ++s.boundary_px;
        } else {
            isum += variation[i];
            ++s.interior_px;
        }
    }
    if (s.boundary_px) s.boundary_mean = bsum / s.boundary_px;
    if (s.interior_px) s.interior_mean = isum / s.interior_px;
    return s;
}

}  // namespace foct
