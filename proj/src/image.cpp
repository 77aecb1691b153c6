#include "koa/image.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace koa {

GrayImage::GrayImage(int w, int h, double fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("GrayImage: dimensions must be >= 1");
    pixels.assign(static_cast<size_t>(w) * h, fill);
}

std::vector<uint8_t> quantize(const GrayImage& img) {
    std::vector<uint8_t> out(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        long q = std::lround(img.pixels[i] * 255.0);  // half away from zero
        if (q < 0) q = 0;
        if (q > 255) q = 255;
        out[i] = static_cast<uint8_t>(q);
    }
    return out;
}

GrayImage dequantize(const std::vector<uint8_t>& raster, int width, int height) {
    if (static_cast<size_t>(width) * height != raster.size())
        throw std::invalid_argument("dequantize: raster size does not match dimensions");
    GrayImage img(width, height);
    for (size_t i = 0; i < raster.size(); ++i) img.pixels[i] = raster[i] / 255.0;
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    auto bytes = quantize(img);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace {

int next_pgm_token(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("read_pgm: truncated header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("read_pgm: not a binary PGM: " + path);
    int w = next_pgm_token(f);
    int h = next_pgm_token(f);
    int maxval = next_pgm_token(f);
    if (w < 1 || h < 1 || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported PGM header in " + path);
    std::vector<uint8_t> raster(static_cast<size_t>(w) * h);
    f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (f.gcount() != static_cast<std::streamsize>(raster.size()))
        throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    return dequantize(raster, w, h);
}

}  // namespace koa
