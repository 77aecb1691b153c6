#pragma once

#include <array>
#include <string>
#include <vector>

#include "koa/image.hpp"
#include "koa/nn.hpp"

namespace koa {

struct ClassifierConfig {
    int input_size = 32;  // 224 at full scale
    std::array<int, 4> stage_channels = {16, 32, 64, 128};
    int head_hidden = 64;
    int num_classes = 5;
};

constexpr int kBackboneStages = 4;

// Low-rank update for a dense weight W (m x n): effective W + s*B*A with
// s = alpha/rank; W stays untouched while the adapter is active.
struct LoraAdapter {
    std::string target;  // dense weight param name, e.g. "head.fc1.w"
    int rank = 0;
    double alpha = 0.0;
    nn::TensorPtr A;  // [rank, n]
    nn::TensorPtr B;  // [m, rank]
};

struct LabeledImage {
    GrayImage image;
    int label = 0;
};

// 4 conv stages (conv3x3 + instance_norm + relu + max_pool 2x2) and a
// global-average-pooled dense head. Stage index doubles as the freeze unit.
struct ClassifierModel {
    ClassifierConfig config;
    nn::ParamMap params;
    std::vector<LoraAdapter> adapters;

    struct Trace {
        nn::TensorPtr logits;
        std::vector<nn::TensorPtr> stage_acts;  // post-relu, pre-pool, per stage
    };
    Trace forward(nn::Tape& tape, const nn::TensorPtr& x) const;
};

ClassifierModel make_classifier(const ClassifierConfig& config, uint64_t seed);

bool is_backbone_param(const std::string& name);
int backbone_stage_of(const std::string& name);  // -1 for head params

struct FreezePolicy {
    int unfreeze_last_k = 1;
};

struct TrainProtocol {
    int stage1_epochs = 5;
    int stage2_epochs = 5;
    int batch = 8;
    double lr = 1e-3;
    uint64_t seed = 0;
};

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

// head + adapters + the last unfreeze_last_k backbone stages
nn::ParamMap trainable_params(const ClassifierModel& model, int unfreeze_last_k);

// Trains backbone + head jointly on a labeled proxy corpus; stands in for
// large-scale pretraining.
std::vector<EpochStats> pretrain_backbone(ClassifierModel& model,
                                          const std::vector<LabeledImage>& data, int epochs,
                                          int batch, double lr, uint64_t seed);

// stage 1: backbone frozen, head (and adapters) trainable
std::vector<EpochStats> train_stage1(ClassifierModel& model, const std::vector<LabeledImage>& data,
                                     const TrainProtocol& protocol);

// stage 2: the last policy.unfreeze_last_k stages thaw; earlier stages must
// stay bit-identical
std::vector<EpochStats> train_stage2(ClassifierModel& model, const std::vector<LabeledImage>& data,
                                     const TrainProtocol& protocol, const FreezePolicy& policy);

// alpha < 0 means the default alpha = rank (scaling 1)
void apply_lora(ClassifierModel& model, const std::string& target, int rank, uint64_t seed,
                double alpha = -1.0);
void merge_lora(ClassifierModel& model);

// softmax probabilities over the 5 grades; the image is resized to the
// model input size first
std::vector<double> predict(const ClassifierModel& model, const GrayImage& img);

int argmax_class(const std::vector<double>& probs);

void save_classifier(const ClassifierModel& model, const std::string& path);
ClassifierModel load_classifier(const std::string& path);

}  // namespace koa
