#include "koa/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "koa/resample.hpp"

namespace koa {

using nn::Tape;
using nn::TensorPtr;

namespace {

std::string stage_prefix(int i) { return "backbone.stage" + std::to_string(i + 1); }

void init_stage(nn::ParamMap& p, int stage, int cin, int cout, Rng& rng) {
    const std::string s = stage_prefix(stage);
    p[s + ".conv.w"] = nn::randn({cout, cin, 3, 3}, rng, std::sqrt(2.0 / (cin * 9)), true);
    p[s + ".conv.b"] = nn::make_tensor({cout}, true);
    p[s + ".norm.gamma"] = nn::full({cout}, 1.0, true);
    p[s + ".norm.beta"] = nn::make_tensor({cout}, true);
}

}  // namespace

ClassifierModel make_classifier(const ClassifierConfig& config, uint64_t seed) {
    if (config.input_size % 16 != 0)
        throw std::invalid_argument("make_classifier: input_size must be divisible by 16");
    ClassifierModel model;
    model.config = config;
    Rng rng(seed);
    int cin = 1;
    for (int i = 0; i < kBackboneStages; ++i) {
        init_stage(model.params, i, cin, config.stage_channels[i], rng);
        cin = config.stage_channels[i];
    }
    const int feat = config.stage_channels[3];
    model.params["head.fc1.w"] =
        nn::randn({config.head_hidden, feat}, rng, std::sqrt(2.0 / feat), true);
    model.params["head.fc1.b"] = nn::make_tensor({config.head_hidden}, true);
    model.params["head.fc2.w"] = nn::randn({config.num_classes, config.head_hidden}, rng,
                                           std::sqrt(2.0 / config.head_hidden), true);
    model.params["head.fc2.b"] = nn::make_tensor({config.num_classes}, true);
    return model;
}

bool is_backbone_param(const std::string& name) { return name.rfind("backbone.", 0) == 0; }

int backbone_stage_of(const std::string& name) {
    if (!is_backbone_param(name)) return -1;
    // backbone.stage<i>....
    return name[std::string("backbone.stage").size()] - '1';
}

ClassifierModel::Trace ClassifierModel::forward(Tape& tape, const TensorPtr& x) const {
    if (x->shape.size() != 4 || x->shape[1] != 1 || x->shape[2] != config.input_size ||
        x->shape[3] != config.input_size)
        throw std::invalid_argument("classifier: expected input [N,1," +
                                    std::to_string(config.input_size) + "," +
                                    std::to_string(config.input_size) + "], got " +
                                    nn::shape_str(x->shape));
    auto at = [this](const std::string& name) -> const TensorPtr& {
        auto it = params.find(name);
        if (it == params.end()) throw std::runtime_error("classifier: missing param " + name);
        return it->second;
    };
    auto lora_for = [this](const std::string& target) -> const LoraAdapter* {
        for (const auto& a : adapters)
            if (a.target == target) return &a;
        return nullptr;
    };
    // dense with an optional active adapter: W x + b + s*B*(A x)
    auto dense_maybe_lora = [&](const TensorPtr& in, const std::string& prefix) {
        auto out = nn::dense(tape, in, at(prefix + ".w"), at(prefix + ".b"));
        if (const LoraAdapter* a = lora_for(prefix + ".w")) {
            auto down = nn::dense(tape, in, a->A, nullptr);
            auto up = nn::dense(tape, down, a->B, nullptr);
            const double s = a->alpha / a->rank;
            if (s != 1.0) {
                auto scaled = nn::make_tensor(up->shape);
                // fold the scaling into a dense-free elementwise op
                for (size_t i = 0; i < up->numel(); ++i) scaled->value[i] = s * up->value[i];
                scaled->ensure_grad();
                tape.record([up, scaled, s] {
                    for (size_t i = 0; i < up->numel(); ++i) up->grad[i] += s * scaled->grad[i];
                });
                up = scaled;
            }
            out = nn::add(tape, out, up);
        }
        return out;
    };

    Trace trace;
    TensorPtr h = x;
    for (int i = 0; i < kBackboneStages; ++i) {
        const std::string s = stage_prefix(i);
        h = nn::conv2d(tape, h, at(s + ".conv.w"), at(s + ".conv.b"), 1, 1);
        h = nn::instance_norm(tape, h, at(s + ".norm.gamma"), at(s + ".norm.beta"));
        h = nn::relu(tape, h);
        trace.stage_acts.push_back(h);
        h = nn::max_pool2d(tape, h, 2);
    }
    h = nn::global_avg_pool(tape, h);
    h = dense_maybe_lora(h, "head.fc1");
    h = nn::relu(tape, h);
    trace.logits = dense_maybe_lora(h, "head.fc2");
    return trace;
}

nn::ParamMap trainable_params(const ClassifierModel& model, int unfreeze_last_k) {
    nn::ParamMap out;
    for (const auto& [name, t] : model.params) {
        int stage = backbone_stage_of(name);
        if (stage < 0 || stage >= kBackboneStages - unfreeze_last_k) out[name] = t;
    }
    for (const auto& a : model.adapters) {
        out["lora." + a.target + ".A"] = a.A;
        out["lora." + a.target + ".B"] = a.B;
    }
    return out;
}

namespace {

TensorPtr batch_tensor(const std::vector<LabeledImage>& data, const std::vector<size_t>& order,
                       size_t start, int n, int size) {
    auto x = nn::make_tensor({n, 1, size, size});
    for (int b = 0; b < n; ++b) {
        const GrayImage& img = data[order[start + b]].image;
        if (img.width != size || img.height != size)
            throw std::invalid_argument("training image dimensions do not match model input");
        std::copy(img.pixels.begin(), img.pixels.end(),
                  x->value.begin() + static_cast<size_t>(b) * size * size);
    }
    return x;
}

std::vector<EpochStats> run_training(ClassifierModel& model, const std::vector<LabeledImage>& data,
                                     const nn::ParamMap& trainable, int epochs, int batch,
                                     double lr, uint64_t seed) {
    if (data.empty()) throw std::runtime_error("training: empty dataset");
    if (batch < 1) throw std::invalid_argument("training: batch must be >= 1");
    if (trainable.empty()) throw std::invalid_argument("training: no trainable parameters");

    Rng rng(seed);
    nn::Adam adam({lr});
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochStats> history;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int correct = 0, steps = 0;
        for (size_t start = 0; start < order.size(); start += batch) {
            const int n = static_cast<int>(std::min<size_t>(batch, order.size() - start));
            auto x = batch_tensor(data, order, start, n, model.config.input_size);
            std::vector<int> labels(n);
            for (int b = 0; b < n; ++b) labels[b] = data[order[start + b]].label;

            Tape tape;
            auto trace = model.forward(tape, x);
            auto loss = nn::softmax_cross_entropy(tape, trace.logits, labels);
            nn::zero_grads(trainable);
            tape.backward(loss);
            adam.step(trainable);

            loss_sum += loss->value[0];
            ++steps;
            const int C = model.config.num_classes;
            for (int b = 0; b < n; ++b) {
                auto row = trace.logits->value.begin() + static_cast<size_t>(b) * C;
                int pred = static_cast<int>(std::max_element(row, row + C) - row);
                if (pred == labels[b]) ++correct;
            }
        }
        history.push_back({loss_sum / steps, static_cast<double>(correct) / data.size()});
    }
    return history;
}

}  // namespace

std::vector<EpochStats> pretrain_backbone(ClassifierModel& model,
                                          const std::vector<LabeledImage>& data, int epochs,
                                          int batch, double lr, uint64_t seed) {
    return run_training(model, data, trainable_params(model, kBackboneStages), epochs, batch, lr,
                        seed);
}

std::vector<EpochStats> train_stage1(ClassifierModel& model, const std::vector<LabeledImage>& data,
                                     const TrainProtocol& protocol) {
    return run_training(model, data, trainable_params(model, 0), protocol.stage1_epochs,
                        protocol.batch, protocol.lr, protocol.seed);
}

std::vector<EpochStats> train_stage2(ClassifierModel& model, const std::vector<LabeledImage>& data,
                                     const TrainProtocol& protocol, const FreezePolicy& policy) {
    int k = policy.unfreeze_last_k;
    if (k > kBackboneStages) k = kBackboneStages;  // clamp oversized policies
    if (k < 0) throw std::invalid_argument("train_stage2: unfreeze_last_k must be >= 0");
    return run_training(model, data, trainable_params(model, k), protocol.stage2_epochs,
                        protocol.batch, protocol.lr, protocol.seed + 1);
}

void apply_lora(ClassifierModel& model, const std::string& target, int rank, uint64_t seed,
                double alpha) {
    auto it = model.params.find(target);
    if (it == model.params.end()) throw std::invalid_argument("apply_lora: no such param " + target);
    const TensorPtr& W = it->second;
    if (W->shape.size() != 2) throw std::invalid_argument("apply_lora: target must be dense");
    const int m = W->shape[0], n = W->shape[1];
    if (rank < 1 || rank > std::min(m, n))
        throw std::invalid_argument("apply_lora: rank must be in [1, min(m,n)]");
    for (const auto& a : model.adapters)
        if (a.target == target) throw std::invalid_argument("apply_lora: adapter already attached");

    LoraAdapter a;
    a.target = target;
    a.rank = rank;
    a.alpha = alpha < 0.0 ? static_cast<double>(rank) : alpha;
    Rng rng(seed);
    a.A = nn::randn({rank, n}, rng, 0.01, true);  // small zero-mean init
    a.B = nn::make_tensor({m, rank}, true);       // zero: adapter starts as identity
    model.adapters.push_back(std::move(a));
}

void merge_lora(ClassifierModel& model) {
    for (const auto& a : model.adapters) {
        TensorPtr W = model.params.at(a.target);
        const int m = W->shape[0], n = W->shape[1];
        const double s = a.alpha / a.rank;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int r = 0; r < a.rank; ++r)
                    acc += a.B->value[static_cast<size_t>(i) * a.rank + r] *
                           a.A->value[static_cast<size_t>(r) * n + j];
                W->value[static_cast<size_t>(i) * n + j] += s * acc;
            }
    }
    model.adapters.clear();
}

std::vector<double> predict(const ClassifierModel& model, const GrayImage& img) {
    const int s = model.config.input_size;
    GrayImage in = (img.width == s && img.height == s)
                       ? img
                       : resize(img, s, s, ResampleFilter::lanczos3);
    auto x = nn::make_tensor({1, 1, s, s}, in.pixels);
    Tape tape;
    auto trace = model.forward(tape, x);
    return nn::softmax(trace.logits->value);
}

int argmax_class(const std::vector<double>& probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void save_classifier(const ClassifierModel& model, const std::string& path) {
    nn::ParamMap params = model.params;
    params["_meta"] = nn::make_tensor(
        {7}, {static_cast<double>(model.config.input_size),
              static_cast<double>(model.config.stage_channels[0]),
              static_cast<double>(model.config.stage_channels[1]),
              static_cast<double>(model.config.stage_channels[2]),
              static_cast<double>(model.config.stage_channels[3]),
              static_cast<double>(model.config.head_hidden),
              static_cast<double>(model.config.num_classes)});
    for (const auto& a : model.adapters) {
        params["lora." + a.target + ".A"] = a.A;
        params["lora." + a.target + ".B"] = a.B;
        params["lora." + a.target + ".alpha"] =
            nn::make_tensor({1}, std::vector<double>{a.alpha});
    }
    nn::save_checkpoint(params, path);
}

ClassifierModel load_classifier(const std::string& path) {
    nn::ParamMap params = nn::load_checkpoint(path);
    auto meta = params.find("_meta");
    if (meta == params.end()) throw std::runtime_error("load_classifier: not a classifier checkpoint");
    ClassifierModel model;
    model.config.input_size = static_cast<int>(meta->second->value[0]);
    for (int i = 0; i < 4; ++i)
        model.config.stage_channels[i] = static_cast<int>(meta->second->value[1 + i]);
    model.config.head_hidden = static_cast<int>(meta->second->value[5]);
    model.config.num_classes = static_cast<int>(meta->second->value[6]);
    params.erase(meta);

    // collect adapters back out of the flat container
    std::vector<std::string> lora_keys;
    for (const auto& [name, t] : params)
        if (name.rfind("lora.", 0) == 0 && name.size() > 2 &&
            name.compare(name.size() - 2, 2, ".A") == 0)
            lora_keys.push_back(name.substr(5, name.size() - 7));
    for (const std::string& target : lora_keys) {
        LoraAdapter a;
        a.target = target;
        a.A = params.at("lora." + target + ".A");
        a.B = params.at("lora." + target + ".B");
        a.alpha = params.at("lora." + target + ".alpha")->value[0];
        a.rank = a.A->shape[0];
        a.A->requires_grad = a.B->requires_grad = true;
        params.erase("lora." + target + ".A");
        params.erase("lora." + target + ".B");
        params.erase("lora." + target + ".alpha");
        model.adapters.push_back(std::move(a));
    }
    model.params = std::move(params);
    return model;
}

}  // namespace koa
