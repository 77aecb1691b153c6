#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "koa/classifier.hpp"
#include "koa/image.hpp"
#include "koa/rng.hpp"

namespace koa {

// Five geometric shape classes (disc, frame, triangle, cross, ring) with
// position/size jitter and additive noise. Used for proxy pretraining and
// the desk-scale classification runs.
std::vector<LabeledImage> make_shape_corpus(int per_class, int size, uint64_t seed);
GrayImage make_shape_image(int label, int size, Rng& rng);

// Pseudo-radiograph: two bright ellipse "bones" separated by a joint gap
// that narrows as the grade increases, with marginal bumps and sclerosis
// bands at high grades. Low global contrast so equalization has headroom.
GrayImage make_pseudo_radiograph(int grade, int size, Rng& rng);

// Writes root/{0..4}/nnnnn.pgm with the given per-grade counts.
void write_pseudo_radiograph_tree(const std::string& root, const std::array<int, 5>& counts,
                                  int size, uint64_t seed);

// per-grade counts proportional to the OAI class ratios, scaled to roughly
// `total` images
std::array<int, 5> imbalanced_counts(int total);

}  // namespace koa
