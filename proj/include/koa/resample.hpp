#pragma once

#include <string>

#include "koa/image.hpp"

namespace koa {

enum class ResampleFilter { nearest, bilinear, lanczos3 };

ResampleFilter parse_filter(const std::string& name);

// windowed sinc, support radius 3; exactly 0 at nonzero integers
double lanczos3_kernel(double x);

// Separable resampling. Source mapping x_src = (x_out + 0.5) * scale - 0.5,
// per-sample weight normalization, clamped edge indices, output clamped to [0,1].
GrayImage resize(const GrayImage& img, int out_width, int out_height, ResampleFilter filter);

}  // namespace koa
