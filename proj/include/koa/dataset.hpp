#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace koa {

constexpr int kNumGrades = 5;  // KL grades 0..4

enum class Split { train, test, valid };
enum class Origin { original, generated };
enum class Variant { original, preprocessed, augmented };

const char* to_string(Split s);
const char* to_string(Origin o);
const char* to_string(Variant v);
Split parse_split(const std::string& s);
Origin parse_origin(const std::string& s);
Variant parse_variant(const std::string& s);

struct Sample {
    std::string id;         // unique within a manifest
    std::string image_ref;  // storage path
    int grade = 0;          // KL grade 0..4
    Split split = Split::train;
    Origin origin = Origin::original;
};

struct Manifest {
    std::vector<Sample> samples;
    Variant variant = Variant::original;
    uint64_t seed = 0;
};

// generated-image count per grade; grade 0 stays 0 by default
struct AugmentPlan {
    std::array<int, kNumGrades> per_grade_counts{};
};

struct SplitRatios {
    double train = 0.75;
    double test = 0.15;
    double valid = 0.10;
};

// Scans root/{0..4}/* for images; grade from the directory name, split
// unassigned (train placeholder), canonical order by id.
Manifest scan_tree(const std::string& root);

// Per-class deterministic shuffle + floor-target assignment, remainder to
// train. Samples are sorted by id before shuffling, so the result does not
// depend on input order.
Manifest stratified_split(const Manifest& manifest, const SplitRatios& ratios, uint64_t seed);

// floor counts per split for one class of n samples (train gets the remainder)
std::array<int, 3> split_targets(int n, const SplitRatios& ratios);

// Appends generated samples (origin=generated, split=train) from
// generated_dir/{grade}/ up to the planned count per grade.
Manifest assemble_augmented(const Manifest& base, const std::string& generated_dir,
                            const AugmentPlan& plan);

struct CountTable {
    // rows by grade: [train, test, valid, total]
    std::array<std::array<int, 4>, kNumGrades> rows{};
    int total = 0;
};

CountTable class_counts(const Manifest& manifest);

// line-delimited text format, one record per line
void write_manifest(const Manifest& manifest, const std::string& path);
Manifest read_manifest(const std::string& path);

}  // namespace koa
