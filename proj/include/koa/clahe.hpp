#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "koa/image.hpp"

namespace koa {

struct Histogram {
    std::array<uint32_t, 256> bins{};
    uint32_t total = 0;
};

// clip_limit is a fraction of the tile pixel count
struct ClaheParams {
    int tile_width = 8;
    int tile_height = 8;
    double clip_limit = 0.03;
};

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
};

// bin index of a normalized luminance value
inline int luminance_bin(double v) {
    int b = static_cast<int>(std::floor(v * 255.0 + 0.5));
    return b < 0 ? 0 : (b > 255 ? 255 : b);
}

Histogram compute_histogram(const GrayImage& img, const Rect& region);

// ceiling = max(1, floor(clip_limit * total)); excess spread uniformly,
// remainder round-robin from bin 0; total preserved exactly, single pass
Histogram clip_redistribute(const Histogram& hist, double clip_limit);

// inclusive CDF scaled by total; non-decreasing, map[255] = 1
std::array<double, 256> equalization_map(const Histogram& hist);

GrayImage clahe(const GrayImage& img, const ClaheParams& params);

}  // namespace koa
