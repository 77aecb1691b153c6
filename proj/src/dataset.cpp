#include "koa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "koa/rng.hpp"

namespace fs = std::filesystem;

namespace koa {

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        default: return "valid";
    }
}

const char* to_string(Origin o) { return o == Origin::original ? "original" : "generated"; }

const char* to_string(Variant v) {
    switch (v) {
        case Variant::original: return "original";
        case Variant::preprocessed: return "preprocessed";
        default: return "augmented";
    }
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    if (s == "valid") return Split::valid;
    throw std::invalid_argument("unknown split: " + s);
}

Origin parse_origin(const std::string& s) {
    if (s == "original") return Origin::original;
    if (s == "generated") return Origin::generated;
    throw std::invalid_argument("unknown origin: " + s);
}

Variant parse_variant(const std::string& s) {
    if (s == "original") return Variant::original;
    if (s == "preprocessed") return Variant::preprocessed;
    if (s == "augmented") return Variant::augmented;
    throw std::invalid_argument("unknown variant: " + s);
}

namespace {

bool looks_like_image(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".pgm" || ext == ".png";
}

}  // namespace

Manifest scan_tree(const std::string& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("scan_tree: not a directory: " + root);
    Manifest m;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        std::string name = entry.path().filename().string();
        if (name.size() != 1 || name[0] < '0' || name[0] > '4')
            throw std::runtime_error("scan_tree: unexpected subdirectory '" + name +
                                     "' (grade directories must be named 0..4)");
        int grade = name[0] - '0';
        for (const auto& file : fs::directory_iterator(entry.path())) {
            if (!file.is_regular_file() || !looks_like_image(file.path())) continue;
            std::error_code ec;
            if (fs::file_size(file.path(), ec) == 0 || ec) {
                std::cerr << "scan_tree: skipping unreadable image " << file.path() << "\n";
                continue;
            }
            Sample s;
            s.id = name + "/" + file.path().filename().string();
            s.image_ref = file.path().string();
            s.grade = grade;
            s.origin = Origin::original;
            m.samples.push_back(std::move(s));
        }
    }
    std::sort(m.samples.begin(), m.samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return m;
}

std::array<int, 3> split_targets(int n, const SplitRatios& ratios) {
    int test = static_cast<int>(std::floor(ratios.test * n));
    int valid = static_cast<int>(std::floor(ratios.valid * n));
    int train = static_cast<int>(std::floor(ratios.train * n));
    train += n - train - test - valid;  // remainder to train
    return {train, test, valid};
}

Manifest stratified_split(const Manifest& manifest, const SplitRatios& ratios, uint64_t seed) {
    if (std::abs(ratios.train + ratios.test + ratios.valid - 1.0) > 1e-9)
        throw std::invalid_argument("stratified_split: ratios must sum to 1");

    Manifest out = manifest;
    out.seed = seed;
    std::sort(out.samples.begin(), out.samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });

    for (int grade = 0; grade < kNumGrades; ++grade) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < out.samples.size(); ++i)
            if (out.samples[i].grade == grade) idx.push_back(i);
        if (idx.empty()) continue;

        Rng rng(seed + static_cast<uint64_t>(grade));
        rng.shuffle(idx);

        auto targets = split_targets(static_cast<int>(idx.size()), ratios);
        size_t pos = 0;
        for (int k = 0; k < targets[0]; ++k) out.samples[idx[pos++]].split = Split::train;
        for (int k = 0; k < targets[1]; ++k) out.samples[idx[pos++]].split = Split::test;
        for (int k = 0; k < targets[2]; ++k) out.samples[idx[pos++]].split = Split::valid;
    }
    return out;
}

Manifest assemble_augmented(const Manifest& base, const std::string& generated_dir,
                            const AugmentPlan& plan) {
    Manifest out = base;
    out.variant = Variant::augmented;
    for (int grade = 0; grade < kNumGrades; ++grade) {
        int want = plan.per_grade_counts[grade];
        if (want < 0) throw std::invalid_argument("assemble_augmented: negative plan count");
        if (want == 0) continue;
        fs::path dir = fs::path(generated_dir) / std::to_string(grade);
        if (!fs::is_directory(dir))
            throw std::runtime_error("assemble_augmented: missing generated directory for grade " +
                                     std::to_string(grade) + ": " + dir.string());
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir))
            if (f.is_regular_file() && looks_like_image(f.path())) files.push_back(f.path());
        std::sort(files.begin(), files.end());
        int take = std::min<int>(want, static_cast<int>(files.size()));
        for (int i = 0; i < take; ++i) {
            Sample s;
            s.id = "gen/" + std::to_string(grade) + "/" + files[i].filename().string();
            s.image_ref = files[i].string();
            s.grade = grade;
            s.split = Split::train;
            s.origin = Origin::generated;
            out.samples.push_back(std::move(s));
        }
    }
    std::sort(out.samples.begin(), out.samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return out;
}

CountTable class_counts(const Manifest& manifest) {
    CountTable t;
    for (const Sample& s : manifest.samples) {
        auto& row = t.rows[s.grade];
        switch (s.split) {
            case Split::train: ++row[0]; break;
            case Split::test: ++row[1]; break;
            case Split::valid: ++row[2]; break;
        }
        ++row[3];
        ++t.total;
    }
    return t;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    f << "manifest\tv1\t" << to_string(manifest.variant) << "\t" << manifest.seed << "\n";
    for (const Sample& s : manifest.samples)
        f << s.id << "\t" << s.image_ref << "\t" << s.grade << "\t" << to_string(s.split) << "\t"
          << to_string(s.origin) << "\n";
}

Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_manifest: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("read_manifest: empty file " + path);
    std::istringstream header(line);
    std::string tag, version, variant;
    uint64_t seed = 0;
    header >> tag >> version >> variant >> seed;
    if (tag != "manifest" || version != "v1")
        throw std::runtime_error("read_manifest: bad header in " + path);

    Manifest m;
    m.variant = parse_variant(variant);
    m.seed = seed;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        Sample s;
        std::string grade, split, origin;
        std::getline(row, s.id, '\t');
        std::getline(row, s.image_ref, '\t');
        std::getline(row, grade, '\t');
        std::getline(row, split, '\t');
        std::getline(row, origin, '\t');
        s.grade = std::stoi(grade);
        if (s.grade < 0 || s.grade >= kNumGrades)
            throw std::runtime_error("read_manifest: bad grade in " + path);
        s.split = parse_split(split);
        s.origin = parse_origin(origin);
        m.samples.push_back(std::move(s));
    }
    return m;
}

}  // namespace koa
