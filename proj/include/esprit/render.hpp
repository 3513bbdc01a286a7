#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esprit/scene.hpp"

namespace esprit {

// Simple RGB raster; serializes to binary PPM (P6).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // 3 bytes per pixel, row-major, top row first

    static Image blank(int w, int h);
    void write_ppm(const std::string& path) const;
    std::vector<uint8_t> ppm_bytes() const;
};

// Rasterize a scene at 1 pixel per world unit with the puzzle color map
// (white background, boundaries clipped away).
Image render_scene(const Scene& scene);

// Horizontal concatenation with a thin separator column.
Image concat_strip(const std::vector<Image>& panels);

}  // namespace esprit
