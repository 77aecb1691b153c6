#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "koa/classifier.hpp"
#include "koa/image.hpp"

namespace koa {

// Non-negative attention weights at a stage's spatial resolution; when any
// weight is positive the maximum is normalized to 1.
struct CamMap {
    int width = 0;
    int height = 0;
    std::vector<double> weights;
    int target_class = 0;
    int target_layer = 0;

    double at(int x, int y) const { return weights[static_cast<size_t>(y) * width + x]; }
};

// Gradient-weighted activation map from the pre-softmax score of class_c at
// backbone stage layer_l (0-based).
CamMap grad_cam(const ClassifierModel& model, const GrayImage& img, int class_c, int layer_l);

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // interleaved, row-major
};

// fixed 256-entry blue-to-red table
const std::array<std::array<uint8_t, 3>, 256>& heat_colormap();

// (1-blend) * gray + blend * colormap(cam), cam bilinearly upsampled to the
// image size
RgbImage overlay(const GrayImage& img, const CamMap& cam, double blend);

void write_ppm(const RgbImage& img, const std::string& path);
RgbImage read_ppm(const std::string& path);

}  // namespace koa
