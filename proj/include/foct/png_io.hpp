#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace foct {

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;                 // 1 (gray) or 3 (rgb), interleaved rows
    std::vector<std::uint8_t> data;   // height*width*channels
};

// Reads an 8-bit PNG; palette/16-bit/alpha variants are converted down to
// gray or RGB. Throws std::runtime_error on unreadable files.
PngImage read_png(const std::string& path);

void write_png_rgb8(const std::string& path, int width, int height,
                    const std::uint8_t* interleaved);
void write_png_gray8(const std::string& path, int width, int height, const std::uint8_t* pixels);

}  // namespace foct
