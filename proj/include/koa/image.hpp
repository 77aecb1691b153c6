#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace koa {

// Single-channel raster, row-major, luminance normalized to [0,1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
};

// round-half-away-from-zero to the 8-bit lattice
std::vector<uint8_t> quantize(const GrayImage& img);
GrayImage dequantize(const std::vector<uint8_t>& raster, int width, int height);

// binary PGM (P5, maxval 255); images persist quantized
void write_pgm(const GrayImage& img, const std::string& path);
GrayImage read_pgm(const std::string& path);

}  // namespace koa
