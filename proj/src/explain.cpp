#include "koa/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "koa/resample.hpp"

namespace koa {

CamMap grad_cam(const ClassifierModel& model, const GrayImage& img, int class_c, int layer_l) {
    if (class_c < 0 || class_c >= model.config.num_classes)
        throw std::invalid_argument("grad_cam: class out of range");
    if (layer_l < 0 || layer_l >= kBackboneStages)
        throw std::invalid_argument("grad_cam: no spatial activations at layer " +
                                    std::to_string(layer_l));

    const int s = model.config.input_size;
    GrayImage in = (img.width == s && img.height == s)
                       ? img
                       : resize(img, s, s, ResampleFilter::lanczos3);
    auto x = nn::make_tensor({1, 1, s, s}, in.pixels);

    nn::Tape tape;
    auto trace = model.forward(tape, x);
    // backward from the pre-softmax logit
    auto score = nn::select(tape, trace.logits, static_cast<size_t>(class_c));
    tape.backward(score);

    const nn::TensorPtr& act = trace.stage_acts[layer_l];
    const int K = act->shape[1], H = act->shape[2], W = act->shape[3];
    const int hw = H * W;

    CamMap cam;
    cam.width = W;
    cam.height = H;
    cam.target_class = class_c;
    cam.target_layer = layer_l;
    cam.weights.assign(static_cast<size_t>(hw), 0.0);

    for (int k = 0; k < K; ++k) {
        const size_t base = static_cast<size_t>(k) * hw;
        double alpha = 0.0;
        for (int i = 0; i < hw; ++i) alpha += act->grad[base + i];
        alpha /= hw;
        for (int i = 0; i < hw; ++i) cam.weights[i] += alpha * act->value[base + i];
    }
    double mx = 0.0;
    for (double& w : cam.weights) {
        w = std::max(0.0, w);
        mx = std::max(mx, w);
    }
    if (mx > 0.0)
        for (double& w : cam.weights) w /= mx;
    return cam;
}

const std::array<std::array<uint8_t, 3>, 256>& heat_colormap() {
    static const auto table = [] {
        std::array<std::array<uint8_t, 3>, 256> t{};
        // piecewise-linear ramp blue -> cyan -> green -> yellow -> red
        const int anchors_idx[5] = {0, 64, 128, 192, 255};
        const int anchors_rgb[5][3] = {
            {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
        for (int seg = 0; seg < 4; ++seg) {
            int i0 = anchors_idx[seg], i1 = anchors_idx[seg + 1];
            for (int i = i0; i <= i1; ++i) {
                double f = static_cast<double>(i - i0) / (i1 - i0);
                for (int c = 0; c < 3; ++c) {
                    double v = anchors_rgb[seg][c] + f * (anchors_rgb[seg + 1][c] - anchors_rgb[seg][c]);
                    t[i][c] = static_cast<uint8_t>(std::lround(v));
                }
            }
        }
        return t;
    }();
    return table;
}

RgbImage overlay(const GrayImage& img, const CamMap& cam, double blend) {
    if (blend < 0.0 || blend > 1.0) throw std::invalid_argument("overlay: blend must be in [0,1]");

    GrayImage cam_img(cam.width, cam.height);
    cam_img.pixels = cam.weights;
    GrayImage up = (cam.width == img.width && cam.height == img.height)
                       ? cam_img
                       : resize(cam_img, img.width, img.height, ResampleFilter::bilinear);

    const auto& table = heat_colormap();
    RgbImage out;
    out.width = img.width;
    out.height = img.height;
    out.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
    for (size_t i = 0; i < img.size(); ++i) {
        const double gray = img.pixels[i] * 255.0;
        int bin = static_cast<int>(std::floor(up.pixels[i] * 255.0 + 0.5));
        bin = std::clamp(bin, 0, 255);
        for (int c = 0; c < 3; ++c) {
            double v = (1.0 - blend) * gray + blend * table[bin][c];
            long q = std::lround(v);
            out.rgb[i * 3 + c] = static_cast<uint8_t>(std::clamp(q, 0L, 255L));
        }
    }
    return out;
}

void write_ppm(const RgbImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

RgbImage read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a binary PPM: " + path);
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    f.get();  // single whitespace after header
    if (w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("read_ppm: unsupported header in " + path);
    RgbImage img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.rgb.size()))
        throw std::runtime_error("read_ppm: truncated pixel data in " + path);
    return img;
}

}  // namespace koa
