#include "koa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace koa {

namespace {

void add_noise_and_clamp(GrayImage& img, Rng& rng, double sigma) {
    for (double& v : img.pixels) v = std::clamp(v + rng.gaussian() * sigma, 0.0, 1.0);
}

}  // namespace

GrayImage make_shape_image(int label, int size, Rng& rng) {
    if (label < 0 || label > 4) throw std::invalid_argument("make_shape_image: label must be 0..4");
    GrayImage img(size, size, 0.08);
    const double cx = size * rng.uniform(0.42, 0.58);
    const double cy = size * rng.uniform(0.42, 0.58);
    const double r = size * rng.uniform(0.26, 0.34);
    const double fg = rng.uniform(0.75, 0.95);

    auto put = [&](int x, int y) {
        if (x >= 0 && x < size && y >= 0 && y < size) img.at(x, y) = fg;
    };

    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            switch (label) {
                case 0:  // filled disc
                    if (d <= r) put(x, y);
                    break;
                case 1:  // square frame
                    if (std::max(std::abs(dx), std::abs(dy)) <= r &&
                        std::max(std::abs(dx), std::abs(dy)) >= r * 0.55)
                        put(x, y);
                    break;
                case 2:  // filled triangle (apex up)
                    if (dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.6) put(x, y);
                    break;
                case 3:  // cross
                    if ((std::abs(dx) <= r * 0.28 && std::abs(dy) <= r) ||
                        (std::abs(dy) <= r * 0.28 && std::abs(dx) <= r))
                        put(x, y);
                    break;
                case 4:  // ring
                    if (d <= r && d >= r * 0.6) put(x, y);
                    break;
            }
        }
    add_noise_and_clamp(img, rng, 0.04);
    return img;
}

std::vector<LabeledImage> make_shape_corpus(int per_class, int size, uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledImage> out;
    out.reserve(static_cast<size_t>(per_class) * 5);
    for (int i = 0; i < per_class; ++i)
        for (int label = 0; label < 5; ++label)
            out.push_back({make_shape_image(label, size, rng), label});
    return out;
}

GrayImage make_pseudo_radiograph(int grade, int size, Rng& rng) {
    if (grade < 0 || grade > 4)
        throw std::invalid_argument("make_pseudo_radiograph: grade must be 0..4");
    GrayImage img(size, size, 0.30);

    // joint gap narrows with severity
    const double gap = (0.26 - 0.05 * grade + rng.uniform(-0.012, 0.012)) * size;
    const double mid = size * (0.5 + rng.uniform(-0.04, 0.04));
    const double half_gap = gap / 2.0;

    const double bone_w = size * rng.uniform(0.34, 0.40);
    const double bone_h = size * rng.uniform(0.16, 0.20);
    const double cxo = size * rng.uniform(-0.03, 0.03);

    const double upper_cy = mid - half_gap - bone_h;
    const double lower_cy = mid + half_gap + bone_h;

    auto ellipse = [&](double cx, double cy, double ax, double ay, double level) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double nx = (x - cx) / ax, ny = (y - cy) / ay;
                const double d = nx * nx + ny * ny;
                if (d <= 1.0) {
                    double soft = std::min(1.0, (1.0 - d) * 6.0);
                    double& p = img.at(x, y);
                    p = std::max(p, 0.30 + (level - 0.30) * soft);
                }
            }
    };

    ellipse(size / 2.0 + cxo, upper_cy, bone_w, bone_h, 0.62);
    ellipse(size / 2.0 + cxo, lower_cy, bone_w, bone_h, 0.62);

    // sclerosis: brighter joint margins from grade 2 up
    if (grade >= 2) {
        const double band = 0.055 * size;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double dy_u = std::abs(y - (mid - half_gap));
                double dy_l = std::abs(y - (mid + half_gap));
                if ((dy_u < band || dy_l < band) && img.at(x, y) > 0.45)
                    img.at(x, y) = std::min(0.70, img.at(x, y) + 0.03 * grade);
            }
    }

    // osteophyte-like bumps at the joint corners, count grows with grade
    const int bumps = grade;
    for (int i = 0; i < bumps; ++i) {
        const double bx = size * (rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0.10, 0.22)
                                                              : rng.uniform(0.78, 0.90));
        const double by = mid + rng.uniform(-1.0, 1.0) * half_gap;
        const double br = size * rng.uniform(0.025, 0.045);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double dx = x - bx, dy = y - by;
                if (dx * dx + dy * dy <= br * br) img.at(x, y) = std::max(img.at(x, y), 0.58);
            }
    }

    add_noise_and_clamp(img, rng, 0.025);
    return img;
}

void write_pseudo_radiograph_tree(const std::string& root, const std::array<int, 5>& counts,
                                  int size, uint64_t seed) {
    Rng rng(seed);
    for (int grade = 0; grade < 5; ++grade) {
        fs::path dir = fs::path(root) / std::to_string(grade);
        fs::create_directories(dir);
        for (int i = 0; i < counts[grade]; ++i) {
            char name[16];
            std::snprintf(name, sizeof(name), "%05d.pgm", i);
            write_pgm(make_pseudo_radiograph(grade, size, rng), (dir / name).string());
        }
    }
}

std::array<int, 5> imbalanced_counts(int total) {
    // OAI class shares: 3857/1770/2578/1286/295 of 9786
    const double shares[5] = {0.3941, 0.1809, 0.2634, 0.1314, 0.0301};
    std::array<int, 5> counts{};
    for (int g = 0; g < 5; ++g) counts[g] = std::max(1, static_cast<int>(shares[g] * total));
    return counts;
}

}  // namespace koa
