#include "koa/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace koa {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ResampleFilter parse_filter(const std::string& name) {
    if (name == "nearest") return ResampleFilter::nearest;
    if (name == "bilinear") return ResampleFilter::bilinear;
    if (name == "lanczos3") return ResampleFilter::lanczos3;
    throw std::invalid_argument("unknown resample filter: " + name);
}

double lanczos3_kernel(double x) {
    x = std::abs(x);
    if (x >= 3.0) return 0.0;
    if (x == std::floor(x)) return x == 0.0 ? 1.0 : 0.0;
    double px = kPi * x;
    return (std::sin(px) / px) * (std::sin(px / 3.0) / (px / 3.0));
}

namespace {

double tent_kernel(double x) {
    x = std::abs(x);
    return x < 1.0 ? 1.0 - x : 0.0;
}

struct KernelSpec {
    double (*fn)(double);
    int support;
};

KernelSpec kernel_for(ResampleFilter f) {
    switch (f) {
        case ResampleFilter::bilinear: return {tent_kernel, 1};
        case ResampleFilter::lanczos3: return {lanczos3_kernel, 3};
        default: return {nullptr, 0};
    }
}

// one separable pass along x; rows stay intact
std::vector<double> resample_axis(const std::vector<double>& src, int src_w, int src_h,
                                  int out_w, ResampleFilter filter) {
    std::vector<double> dst(static_cast<size_t>(out_w) * src_h);
    const double scale = static_cast<double>(src_w) / out_w;

    if (filter == ResampleFilter::nearest) {
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * scale - 0.5;
            int i = static_cast<int>(std::floor(sx + 0.5));
            i = std::clamp(i, 0, src_w - 1);
            for (int y = 0; y < src_h; ++y)
                dst[static_cast<size_t>(y) * out_w + x] = src[static_cast<size_t>(y) * src_w + i];
        }
        return dst;
    }

    KernelSpec k = kernel_for(filter);
    for (int x = 0; x < out_w; ++x) {
        double sx = (x + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::floor(sx)) - k.support + 1;
        int hi = static_cast<int>(std::floor(sx)) + k.support;
        double wsum = 0.0;
        std::vector<double> w(hi - lo + 1);
        for (int i = lo; i <= hi; ++i) {
            w[i - lo] = k.fn(sx - i);
            wsum += w[i - lo];
        }
        for (int y = 0; y < src_h; ++y) {
            double acc = 0.0;
            for (int i = lo; i <= hi; ++i) {
                int si = std::clamp(i, 0, src_w - 1);
                acc += w[i - lo] * src[static_cast<size_t>(y) * src_w + si];
            }
            dst[static_cast<size_t>(y) * out_w + x] = acc / wsum;
        }
    }
    return dst;
}

std::vector<double> transpose(const std::vector<double>& m, int w, int h) {
    std::vector<double> t(m.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            t[static_cast<size_t>(x) * h + y] = m[static_cast<size_t>(y) * w + x];
    return t;
}

}  // namespace

GrayImage resize(const GrayImage& img, int out_width, int out_height, ResampleFilter filter) {
    if (out_width < 1 || out_height < 1)
        throw std::invalid_argument("resize: output dimensions must be >= 1");

    // horizontal pass, then vertical via transpose
    std::vector<double> pass1 = resample_axis(img.pixels, img.width, img.height, out_width, filter);
    std::vector<double> t = transpose(pass1, out_width, img.height);
    std::vector<double> pass2 = resample_axis(t, img.height, out_width, out_height, filter);

    GrayImage out(out_width, out_height);
    out.pixels = transpose(pass2, out_height, out_width);
    for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace koa
