#include "koa/clahe.hpp"

#include <stdexcept>
#include <vector>

namespace koa {

Histogram compute_histogram(const GrayImage& img, const Rect& region) {
    if (region.x < 0 || region.y < 0 || region.w < 1 || region.h < 1 ||
        region.x + region.w > img.width || region.y + region.h > img.height)
        throw std::out_of_range("compute_histogram: region out of image bounds");
    Histogram h;
    for (int y = region.y; y < region.y + region.h; ++y)
        for (int x = region.x; x < region.x + region.w; ++x)
            ++h.bins[luminance_bin(img.at(x, y))];
    h.total = static_cast<uint32_t>(region.w) * static_cast<uint32_t>(region.h);
    return h;
}

Histogram clip_redistribute(const Histogram& hist, double clip_limit) {
    if (hist.total == 0) throw std::invalid_argument("clip_redistribute: empty histogram");
    uint32_t ceiling = static_cast<uint32_t>(clip_limit * hist.total);
    if (ceiling < 1) ceiling = 1;
    Histogram out;
    out.total = hist.total;
    uint32_t excess = 0;
    for (int b = 0; b < 256; ++b) {
        uint32_t c = hist.bins[b];
        if (c > ceiling) {
            excess += c - ceiling;
            c = ceiling;
        }
        out.bins[b] = c;
    }
    uint32_t share = excess / 256;
    uint32_t remainder = excess % 256;
    for (int b = 0; b < 256; ++b) out.bins[b] += share;
    for (uint32_t b = 0; b < remainder; ++b) ++out.bins[b];
    return out;
}

std::array<double, 256> equalization_map(const Histogram& hist) {
    if (hist.total == 0) throw std::invalid_argument("equalization_map: empty histogram");
    std::array<double, 256> map;
    uint64_t cum = 0;
    for (int b = 0; b < 256; ++b) {
        cum += hist.bins[b];
        map[b] = static_cast<double>(cum) / static_cast<double>(hist.total);
    }
    return map;
}

GrayImage clahe(const GrayImage& img, const ClaheParams& params) {
    if (params.tile_width < 2 || params.tile_height < 2 ||
        params.tile_width > img.width || params.tile_height > img.height)
        throw std::invalid_argument("clahe: tile dimensions must be in [2, image size]");
    if (!(params.clip_limit > 0.0 && params.clip_limit <= 1.0))
        throw std::invalid_argument("clahe: clip_limit must be in (0,1]");

    const int tiles_x = (img.width + params.tile_width - 1) / params.tile_width;
    const int tiles_y = (img.height + params.tile_height - 1) / params.tile_height;

    // per-tile equalization maps; edge tiles may be smaller
    std::vector<std::array<double, 256>> maps(static_cast<size_t>(tiles_x) * tiles_y);
    std::vector<double> center_x(tiles_x), center_y(tiles_y);
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            Rect r;
            r.x = tx * params.tile_width;
            r.y = ty * params.tile_height;
            r.w = std::min(params.tile_width, img.width - r.x);
            r.h = std::min(params.tile_height, img.height - r.y);
            Histogram h = clip_redistribute(compute_histogram(img, r), params.clip_limit);
            maps[static_cast<size_t>(ty) * tiles_x + tx] = equalization_map(h);
            if (ty == 0) center_x[tx] = r.x + (r.w - 1) / 2.0;
            if (tx == 0) center_y[ty] = r.y + (r.h - 1) / 2.0;
        }
    }

    // locate the interpolation cell along one axis: returns (i0, i1, frac)
    auto locate = [](const std::vector<double>& centers, double p, int& i0, int& i1, double& f) {
        int n = static_cast<int>(centers.size());
        if (p <= centers[0]) {
            i0 = i1 = 0;
            f = 0.0;
        } else if (p >= centers[n - 1]) {
            i0 = i1 = n - 1;
            f = 0.0;
        } else {
            i1 = 1;
            while (centers[i1] < p) ++i1;
            i0 = i1 - 1;
            f = (p - centers[i0]) / (centers[i1] - centers[i0]);
        }
    };

    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        int ty0, ty1;
        double fy;
        locate(center_y, y, ty0, ty1, fy);
        for (int x = 0; x < img.width; ++x) {
            int tx0, tx1;
            double fx;
            locate(center_x, x, tx0, tx1, fx);
            int bin = luminance_bin(img.at(x, y));
            double m00 = maps[static_cast<size_t>(ty0) * tiles_x + tx0][bin];
            double m01 = maps[static_cast<size_t>(ty0) * tiles_x + tx1][bin];
            double m10 = maps[static_cast<size_t>(ty1) * tiles_x + tx0][bin];
            double m11 = maps[static_cast<size_t>(ty1) * tiles_x + tx1][bin];
            out.at(x, y) = (1.0 - fy) * ((1.0 - fx) * m00 + fx * m01) +
                           fy * ((1.0 - fx) * m10 + fx * m11);
        }
    }
    return out;
}

}  // namespace koa
