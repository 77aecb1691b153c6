#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "koa/classifier.hpp"
#include "koa/clahe.hpp"
#include "koa/dataset.hpp"
#include "koa/diffusion.hpp"

namespace koa {

struct Metrics {
    double accuracy = 0.0;
    std::array<double, kNumGrades> per_class_recall{};
    double macro_f1 = 0.0;
    std::array<std::array<int, kNumGrades>, kNumGrades> confusion{};  // [true][pred]
    int total = 0;
};

// exact confusion counts; per-class F1 treats 0/0 as 0
Metrics confusion(const std::vector<int>& preds, const std::vector<int>& labels);

std::string format_metrics(const Metrics& m);
Metrics parse_metrics(const std::string& text);

struct ReportCell {
    bool present = false;
    Metrics test;
    Metrics valid;
};

struct ReportRow {
    std::string model;
    std::array<ReportCell, 3> cells;  // indexed by Variant
};

struct ExperimentReport {
    std::vector<ReportRow> rows;  // insertion order
};

void add_result(ExperimentReport& report, const std::string& model, Variant variant,
                const Metrics& test, const Metrics& valid);

// whole-percent table in the three-dataset comparison layout
std::string emit_report(const ExperimentReport& report, const std::string& format);

// truncated-toward-zero whole percent from exact confusion counts
int accuracy_percent(const Metrics& m);

struct UpscaleResult {
    int processed = 0;
    std::vector<std::string> failures;
};

// Upscales every image in dir_in to mid_size (external command template with
// {in}/{out} placeholders, or the built-in lanczos3 when the template is
// empty), then resizes to final_size into dir_out.
UpscaleResult external_upscale(const std::string& dir_in, const std::string& dir_out,
                               const std::string& command_template, int mid_size = 256,
                               int final_size = 224);

struct ExperimentSpec {
    Variant variant = Variant::original;
    std::string model_name = "desk-cnn";
    std::string data_root;
    std::string work_dir;
    uint64_t seed = 0;

    ClaheParams clahe;
    ClassifierConfig model;
    TrainProtocol protocol;
    FreezePolicy freeze;
    int lora_rank = 0;
    std::string pretrained_checkpoint;

    // augmented-variant stages
    DiffusionTrainConfig diffusion;
    int diffusion_size = 64;  // training/generation resolution
    SampleRequest sample_request;
    AugmentPlan plan;
    std::string upscale_command;
    int upscale_mid = 256;
    int upscale_final = 224;
};

struct ExperimentResult {
    Metrics test;
    Metrics valid;
    Manifest manifest;
};

// Runs one (model, variant) cell end to end: manifest split, optional CLAHE,
// optional diffusion augmentation + upscale chain, two-stage training, and
// evaluation on the held-out splits.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// shared loading path: read a manifest image and resize to the model input
LabeledImage load_sample(const Sample& sample, int input_size);
std::vector<LabeledImage> load_split(const Manifest& manifest, Split split, int input_size);

}  // namespace koa
