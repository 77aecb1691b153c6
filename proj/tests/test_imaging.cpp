#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "koa/clahe.hpp"
#include "koa/image.hpp"
#include "koa/resample.hpp"
#include "koa/rng.hpp"
#include "oracles.hpp"

using namespace koa;

namespace {

GrayImage random_image(int w, int h, Rng& rng) {
    GrayImage img(w, h);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

double stddev(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / v.size());
}

}  // namespace

TEST_CASE("compute_histogram basics") {
    GrayImage zeros(4, 4, 0.0);
    Histogram h = compute_histogram(zeros, {0, 0, 4, 4});
    CHECK(h.bins[0] == 16);
    CHECK(h.total == 16);
    for (int b = 1; b < 256; ++b) CHECK(h.bins[b] == 0);

    GrayImage ones(2, 2, 1.0);
    h = compute_histogram(ones, {0, 0, 2, 2});
    CHECK(h.bins[255] == 4);

    GrayImage two(2, 1);
    two.at(0, 0) = 0.0;
    two.at(1, 0) = 0.5;  // floor(0.5*255 + 0.5) = 128
    h = compute_histogram(two, {0, 0, 2, 1});
    CHECK(h.bins[0] == 1);
    CHECK(h.bins[128] == 1);

    CHECK_THROWS(compute_histogram(zeros, {2, 2, 4, 4}));
}

TEST_CASE("clip_redistribute") {
    SUBCASE("nothing above the ceiling") {
        Histogram h;
        for (int b = 0; b < 16; ++b) h.bins[b] = 4;
        h.total = 64;
        Histogram out = clip_redistribute(h, 1.0);
        CHECK(out.bins == h.bins);
    }
    SUBCASE("single loaded bin") {
        Histogram h;
        h.bins[10] = 64;
        h.total = 64;
        Histogram out = clip_redistribute(h, 0.25);  // ceiling 16, excess 48
        CHECK(out.bins[10] == 17);                   // 16 kept + round-robin (10 < 48)
        CHECK(out.bins[0] == 1);
        CHECK(out.bins[47] == 1);
        CHECK(out.bins[48] == 0);
        uint64_t total = 0;
        for (auto c : out.bins) total += c;
        CHECK(total == 64);
    }
    SUBCASE("two bins") {
        Histogram h;
        h.bins[0] = 40;
        h.bins[1] = 24;
        h.total = 64;
        Histogram out = clip_redistribute(h, 0.5);  // ceiling 32, excess 8
        CHECK(out.bins[0] == 33);
        CHECK(out.bins[1] == 25);
        for (int b = 2; b < 8; ++b) CHECK(out.bins[b] == 1);
        CHECK(out.bins[8] == 0);
    }
    SUBCASE("total preserved on random histograms") {
        Rng rng(7);
        for (int trial = 0; trial < 10000; ++trial) {
            Histogram h;
            uint32_t total = 0;
            for (int b = 0; b < 256; ++b) {
                h.bins[b] = static_cast<uint32_t>(rng.below(20));
                total += h.bins[b];
            }
            if (total == 0) {
                h.bins[0] = 1;
                total = 1;
            }
            h.total = total;
            double clip = rng.uniform(0.001, 1.0);
            Histogram out = clip_redistribute(h, clip);
            uint64_t sum = 0;
            for (auto c : out.bins) sum += c;
            CHECK(sum == total);
            CHECK(out.bins == oracle::clip_reference(h.bins, total, clip));
        }
    }
    SUBCASE("empty histogram") {
        Histogram h;
        CHECK_THROWS(clip_redistribute(h, 0.5));
    }
}

TEST_CASE("equalization_map") {
    SUBCASE("uniform histogram") {
        Histogram h;
        for (int b = 0; b < 256; ++b) h.bins[b] = 4;
        h.total = 1024;
        auto map = equalization_map(h);
        for (int b = 0; b < 256; ++b) CHECK(map[b] == doctest::Approx((b + 1) / 256.0).epsilon(1e-12));
    }
    SUBCASE("degenerate CDF") {
        Histogram h;
        h.bins[0] = 10;
        h.total = 10;
        auto map = equalization_map(h);
        for (int b = 0; b < 256; ++b) CHECK(map[b] == 1.0);
    }
    SUBCASE("two spikes") {
        Histogram h;
        h.bins[0] = 2;
        h.bins[255] = 2;
        h.total = 4;
        auto map = equalization_map(h);
        CHECK(map[0] == 0.5);
        CHECK(map[254] == 0.5);
        CHECK(map[255] == 1.0);
    }
    SUBCASE("monotone on random inputs") {
        Rng rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            Histogram h;
            for (int b = 0; b < 256; ++b) {
                h.bins[b] = static_cast<uint32_t>(rng.below(50));
                h.total += h.bins[b];
            }
            if (h.total == 0) continue;
            auto map = equalization_map(h);
            for (int b = 1; b < 256; ++b) CHECK(map[b] >= map[b - 1]);
            CHECK(map[255] == 1.0);
        }
    }
    SUBCASE("empty histogram") {
        Histogram h;
        CHECK_THROWS(equalization_map(h));
    }
}

TEST_CASE("clahe matches the per-pixel reference bit for bit") {
    Rng rng(42);
    for (double clip : {0.03, 0.25, 1.0}) {
        for (int trial = 0; trial < 5; ++trial) {
            GrayImage img = random_image(16, 16, rng);
            GrayImage got = clahe(img, {8, 8, clip});
            GrayImage want = oracle::clahe_reference(img, 8, 8, clip);
            REQUIRE(got.pixels.size() == want.pixels.size());
            for (size_t i = 0; i < got.pixels.size(); ++i) CHECK(got.pixels[i] == want.pixels[i]);
        }
        // smaller image, 2x2 grid of 4x4 tiles
        GrayImage img = random_image(8, 8, rng);
        GrayImage got = clahe(img, {4, 4, clip});
        GrayImage want = oracle::clahe_reference(img, 4, 4, clip);
        for (size_t i = 0; i < got.pixels.size(); ++i) CHECK(got.pixels[i] == want.pixels[i]);
    }
}

TEST_CASE("clahe on edge tiles (image not divisible by tile)") {
    Rng rng(43);
    GrayImage img = random_image(11, 7, rng);
    GrayImage got = clahe(img, {4, 4, 0.25});
    GrayImage want = oracle::clahe_reference(img, 4, 4, 0.25);
    for (size_t i = 0; i < got.pixels.size(); ++i) CHECK(got.pixels[i] == want.pixels[i]);
}

TEST_CASE("clahe degenerate and contrast cases") {
    SUBCASE("constant image stays near-constant and matches the oracle") {
        GrayImage img(8, 8, 0.4);
        GrayImage got = clahe(img, {4, 4, 0.5});
        GrayImage want = oracle::clahe_reference(img, 4, 4, 0.5);
        for (size_t i = 0; i < got.pixels.size(); ++i) {
            CHECK(got.pixels[i] == want.pixels[i]);
            CHECK(got.pixels[i] >= 0.0);
            CHECK(got.pixels[i] <= 1.0);
        }
    }
    SUBCASE("binary checkerboard stays in range") {
        GrayImage img(16, 16);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) img.at(x, y) = (x + y) % 2 ? 1.0 : 0.0;
        GrayImage out = clahe(img, {8, 8, 0.03});
        for (double v : out.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("low-contrast gradient gains at least 2x standard deviation") {
        GrayImage img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) img.at(x, y) = 0.45 + 0.10 * (x + y) / 126.0;
        GrayImage out = clahe(img, {8, 8, 0.03});
        CHECK(stddev(out.pixels) >= 2.0 * stddev(img.pixels));
        for (double v : out.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("tile larger than image") {
        GrayImage img(8, 8, 0.5);
        CHECK_THROWS(clahe(img, {16, 16, 0.03}));
        CHECK_THROWS(clahe(img, {4, 4, 0.0}));
        CHECK_THROWS(clahe(img, {4, 4, 1.5}));
    }
}

TEST_CASE("lanczos3 kernel") {
    CHECK(lanczos3_kernel(0.0) == 1.0);
    CHECK(lanczos3_kernel(1.0) == 0.0);
    CHECK(lanczos3_kernel(2.0) == 0.0);
    CHECK(lanczos3_kernel(-2.0) == 0.0);
    CHECK(lanczos3_kernel(3.5) == 0.0);
    CHECK(lanczos3_kernel(3.0) == 0.0);
    const double pi = 3.14159265358979323846;
    CHECK(std::abs(lanczos3_kernel(0.5) - 6.0 / (pi * pi)) < 1e-12);
    CHECK(std::abs(lanczos3_kernel(0.5) - 0.60793) < 1e-5);
}

TEST_CASE("resize") {
    Rng rng(5);
    SUBCASE("identity is lossless") {
        for (int trial = 0; trial < 100; ++trial) {
            int w = rng.range_int(2, 24), h = rng.range_int(2, 24);
            GrayImage img = random_image(w, h, rng);
            GrayImage out = resize(img, w, h, ResampleFilter::lanczos3);
            for (size_t i = 0; i < img.pixels.size(); ++i)
                CHECK(std::abs(out.pixels[i] - img.pixels[i]) < 1e-6);
        }
    }
    SUBCASE("constant maps to constant") {
        for (int trial = 0; trial < 100; ++trial) {
            int w = rng.range_int(1, 40), h = rng.range_int(1, 40);
            int ow = rng.range_int(1, 40), oh = rng.range_int(1, 40);
            double v = rng.uniform(0.05, 0.95);
            GrayImage img(w, h, v);
            for (auto filter : {ResampleFilter::nearest, ResampleFilter::bilinear,
                                ResampleFilter::lanczos3}) {
                GrayImage out = resize(img, ow, oh, filter);
                for (double p : out.pixels) CHECK(std::abs(p - v) < 1e-9);
            }
        }
    }
    SUBCASE("64 -> 256 -> 224 chain matches the scalar reference") {
        GrayImage img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                img.at(x, y) = 0.5 + 0.4 * std::sin(x * 0.3) * std::cos(y * 0.2);
        for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);

        GrayImage got = resize(resize(img, 256, 256, ResampleFilter::lanczos3), 224, 224,
                               ResampleFilter::lanczos3);
        GrayImage want = oracle::resize_reference(oracle::resize_reference(img, 256, 256), 224, 224);
        REQUIRE(got.pixels.size() == want.pixels.size());
        double max_err = 0.0;
        for (size_t i = 0; i < got.pixels.size(); ++i)
            max_err = std::max(max_err, std::abs(got.pixels[i] - want.pixels[i]));
        CHECK(max_err < 1e-5);
    }
    SUBCASE("zero output dimension") {
        GrayImage img(4, 4, 0.5);
        CHECK_THROWS(resize(img, 0, 4, ResampleFilter::lanczos3));
        CHECK_THROWS(resize(img, 4, 0, ResampleFilter::nearest));
    }
}

TEST_CASE("quantize / dequantize") {
    GrayImage img(3, 1);
    img.at(0, 0) = 0.0;
    img.at(1, 0) = 1.0;
    img.at(2, 0) = 0.5;  // 127.5 rounds away from zero
    auto q = quantize(img);
    CHECK(q[0] == 0);
    CHECK(q[1] == 255);
    CHECK(q[2] == 128);

    SUBCASE("8-bit round trip is exact") {
        Rng rng(3);
        std::vector<uint8_t> raster(64);
        for (auto& b : raster) b = static_cast<uint8_t>(rng.below(256));
        GrayImage d = dequantize(raster, 8, 8);
        CHECK(quantize(d) == raster);
    }
    SUBCASE("quantization error bound") {
        Rng rng(4);
        GrayImage im(16, 16);
        for (double& v : im.pixels) v = rng.uniform();
        GrayImage back = dequantize(quantize(im), 16, 16);
        for (size_t i = 0; i < im.pixels.size(); ++i)
            CHECK(std::abs(back.pixels[i] - im.pixels[i]) <= 1.0 / 510.0 + 1e-12);
    }
}

TEST_CASE("pgm round trip") {
    Rng rng(9);
    GrayImage img = random_image(13, 7, rng);
    std::string path = "test_roundtrip.pgm";
    write_pgm(img, path);
    GrayImage back = read_pgm(path);
    CHECK(back.width == 13);
    CHECK(back.height == 7);
    CHECK(quantize(back) == quantize(img));
    std::remove(path.c_str());
    CHECK_THROWS(read_pgm("does_not_exist.pgm"));
}
