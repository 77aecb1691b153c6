// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "koa/clahe.hpp"
#include "koa/classifier.hpp"
#include "koa/diffusion.hpp"
#include "koa/explain.hpp"
#include "koa/harness.hpp"
#include "koa/resample.hpp"
#include "koa/synth.hpp"
#include "oracles.hpp"

using namespace koa;
namespace fs = std::filesystem;

namespace {

void expect(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

double stddev(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / v.size());
}

// ---- criterion 1: CLAHE bit-equivalence against the per-pixel oracle ----

void criterion_clahe_oracle() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    for (double clip : {0.03, 0.25, 1.0}) {
        for (int trial = 0; trial < 20; ++trial) {
            GrayImage img(16, 16);
            for (auto& v : img.pixels) v = rng.uniform();
            GrayImage got = clahe(img, {8, 8, clip});  // 2x2 tile grid
            GrayImage want = oracle::clahe_reference(img, 8, 8, clip);
            for (size_t i = 0; i < img.size(); ++i)
                expect(got.pixels[i] == want.pixels[i],
                       "pixel " + std::to_string(i) + " differs from the oracle");
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(secs < 1.0, "oracle comparison took " + std::to_string(secs) + "s (limit 1s)");
}

// ---- criterion 2: CLAHE contrast gain on the low-contrast gradient ----

void criterion_clahe_contrast() {
    GrayImage img(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) img.at(x, y) = 0.45 + 0.10 * (x + y) / 126.0;
    GrayImage out = clahe(img, {8, 8, 0.03});
    double gain = stddev(out.pixels) / stddev(img.pixels);
    expect(gain >= 2.0, "contrast gain " + std::to_string(gain) + " < 2.0");
    for (double v : out.pixels) expect(v >= 0.0 && v <= 1.0, "output left [0,1]");
}

// ---- criterion 3: resampling ----

void criterion_resampling() {
    Rng rng(1003);
    GrayImage img(32, 32);
    for (auto& v : img.pixels) v = rng.uniform();
    GrayImage same = resize(img, 32, 32, ResampleFilter::lanczos3);
    for (size_t i = 0; i < img.size(); ++i)
        expect(std::abs(same.pixels[i] - img.pixels[i]) < 1e-6, "identity resize error >= 1e-6");

    GrayImage pattern(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            pattern.at(x, y) =
                std::clamp(0.5 + 0.4 * std::sin(x * 0.3) * std::cos(y * 0.2), 0.0, 1.0);
    GrayImage got = resize(resize(pattern, 256, 256, ResampleFilter::lanczos3), 224, 224,
                           ResampleFilter::lanczos3);
    GrayImage want =
        oracle::resize_reference(oracle::resize_reference(pattern, 256, 256), 224, 224);
    for (size_t i = 0; i < got.pixels.size(); ++i)
        expect(std::abs(got.pixels[i] - want.pixels[i]) < 1e-5,
               "64->256->224 chain deviates from the scalar reference");

    const double pi = 3.14159265358979323846;
    const double independent = (std::sin(pi * 0.5) / (pi * 0.5)) *
                               (std::sin(pi * 0.5 / 3.0) / (pi * 0.5 / 3.0));  // = 0.60793...
    expect(std::abs(lanczos3_kernel(0.5) - independent) < 1e-6, "lanczos3_kernel(0.5) off");
}

// ---- criterion 4: finite-difference gradient checks for every op ----

using GraphFn = std::function<nn::TensorPtr(nn::Tape&)>;

double max_scaled_grad_err(const GraphFn& graph, const std::vector<nn::TensorPtr>& inputs) {
    nn::Tape tape;
    auto loss = graph(tape);
    for (const auto& in : inputs) {
        in->ensure_grad();
        in->zero_grad();
    }
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& in : inputs) analytic.push_back(in->grad);

    const double h = 1e-4;
    double worst = 0.0;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        const auto& in = inputs[ti];
        for (size_t i = 0; i < in->numel(); ++i) {
            const double orig = in->value[i];
            in->value[i] = orig + h;
            nn::Tape tp;
            const double lp = graph(tp)->value[0];
            in->value[i] = orig - h;
            nn::Tape tm;
            const double lm = graph(tm)->value[0];
            in->value[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[ti][i];
            worst = std::max(worst,
                             std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
        }
    }
    return worst;
}

void criterion_autodiff() {
    Rng rng(1004);
    auto rand_t = [&rng](nn::Shape s, double scale = 1.0) { return nn::randn(s, rng, scale); };
    auto vs_target = [](GraphFn op, nn::TensorPtr target) -> GraphFn {
        return [op = std::move(op), target](nn::Tape& t) { return nn::mse(t, op(t), target); };
    };
    double worst = 0.0;
    auto run = [&worst](const GraphFn& g, const std::vector<nn::TensorPtr>& inputs) {
        worst = std::max(worst, max_scaled_grad_err(g, inputs));
    };

    for (int i = 0; i < 100; ++i) {
        {
            auto x = rand_t({2, 5}), W = rand_t({4, 5}), b = rand_t({4});
            run(vs_target([=](nn::Tape& t) { return nn::dense(t, x, W, b); }, rand_t({2, 4})),
                {x, W, b});
        }
        {
            auto x = rand_t({2, 2, 4, 4}), K = rand_t({3, 2, 3, 3}, 0.5), b = rand_t({3});
            run(vs_target([=](nn::Tape& t) { return nn::conv2d(t, x, K, b, 1, 1); },
                          rand_t({2, 3, 4, 4})),
                {x, K, b});
            auto x2 = rand_t({1, 2, 6, 6}), K2 = rand_t({2, 2, 2, 2}, 0.5);
            run(vs_target([=](nn::Tape& t) { return nn::conv2d(t, x2, K2, nullptr, 2, 0); },
                          rand_t({1, 2, 3, 3})),
                {x2, K2});
        }
        {
            auto x = rand_t({2, 2, 4, 4});
            for (auto& v : x->value)
                if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;
            run(vs_target([=](nn::Tape& t) { return nn::relu(t, x); }, rand_t({2, 2, 4, 4})), {x});
        }
        {
            auto x = rand_t({3, 6});
            run(vs_target([=](nn::Tape& t) { return nn::silu(t, x); }, rand_t({3, 6})), {x});
        }
        {
            auto x = rand_t({2, 2, 4, 4});
            run(vs_target([=](nn::Tape& t) { return nn::avg_pool2d(t, x, 2); }, rand_t({2, 2, 2, 2})),
                {x});
            auto xs = nn::make_tensor({2, 2, 4, 4});
            for (size_t j = 0; j < xs->numel(); ++j)
                xs->value[j] = rng.uniform() * 8.0 + 0.02 * static_cast<double>(j % 97);
            run(vs_target([=](nn::Tape& t) { return nn::max_pool2d(t, xs, 2); },
                          rand_t({2, 2, 2, 2})),
                {xs});
            run(vs_target([=](nn::Tape& t) { return nn::global_avg_pool(t, x); }, rand_t({2, 2})),
                {x});
        }
        {
            auto x = rand_t({1, 2, 3, 3});
            run(vs_target([=](nn::Tape& t) { return nn::upsample_nearest2x(t, x); },
                          rand_t({1, 2, 6, 6})),
                {x});
        }
        {
            auto x = rand_t({2, 2, 2, 2}), y = rand_t({2, 3, 2, 2});
            run(vs_target([=](nn::Tape& t) { return nn::concat(t, x, y, 1); }, rand_t({2, 5, 2, 2})),
                {x, y});
        }
        {
            auto x = rand_t({3, 4}), y = rand_t({3, 4});
            run(vs_target([=](nn::Tape& t) { return nn::add(t, x, y); }, rand_t({3, 4})), {x, y});
            run(vs_target([=](nn::Tape& t) { return nn::add_scalar(t, x, 0.3); }, rand_t({3, 4})),
                {x});
        }
        {
            auto x = rand_t({2, 3, 2, 2}), v = rand_t({2, 3});
            run(vs_target([=](nn::Tape& t) { return nn::add_channelwise(t, x, v); },
                          rand_t({2, 3, 2, 2})),
                {x, v});
        }
        {
            auto x = rand_t({2, 2, 3, 3}), g = rand_t({2}), b = rand_t({2});
            run(vs_target([=](nn::Tape& t) { return nn::instance_norm(t, x, g, b); },
                          rand_t({2, 2, 3, 3})),
                {x, g, b});
        }
        {
            auto logits = rand_t({3, 5});
            std::vector<int> labels = {rng.range_int(0, 4), rng.range_int(0, 4),
                                       rng.range_int(0, 4)};
            run([=](nn::Tape& t) { return nn::softmax_cross_entropy(t, logits, labels); },
                {logits});
            auto a = rand_t({3, 4}), b2 = rand_t({3, 4});
            run([=](nn::Tape& t) { return nn::mse(t, a, b2); }, {a, b2});
            run([=](nn::Tape& t) { return nn::sum(t, a); }, {a});
            run([=](nn::Tape& t) { return nn::select(t, a, 5); }, {a});
        }
    }
    expect(worst < 1e-4, "worst scaled gradient error " + std::to_string(worst));
}

// ---- criterion 5: forward-diffusion statistics ----

void criterion_forward_stats() {
    NoiseSchedule s = build_schedule(1000);
    const double x0 = 0.37;
    for (int t : {250, 500, 1000}) {
        Rng rng(1005 + t);
        const int N = 10000;
        const double a = std::sqrt(s.alpha_bar(t));
        const double var_want = 1.0 - s.alpha_bar(t);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < N; ++i) {
            double xt = forward_diffuse({x0}, t, {rng.gaussian()}, s)[0];
            sum += xt;
            sumsq += xt * xt;
        }
        const double mean = sum / N;
        const double var = sumsq / N - mean * mean;
        const double se = std::sqrt(var_want / N);
        expect(std::abs(mean - a * x0) < 3.0 * se,
               "mean off at t=" + std::to_string(t) + ": " + std::to_string(mean));
        expect(std::abs(var - var_want) < 0.05 * var_want,
               "variance off at t=" + std::to_string(t) + ": " + std::to_string(var));
    }
}

// ---- criterion 6: DDIM oracle chain + determinism ----

void criterion_ddim_oracle() {
    NoiseSchedule s = build_schedule(1000);
    Rng rng(1006);
    std::vector<double> x0(64);
    for (auto& v : x0) v = rng.uniform(-0.9, 0.9);
    DenoiseFn denoise = [&x0, &s](const std::vector<double>& x_t, int t) {
        const double a = std::sqrt(s.alpha_bar(t));
        const double b = std::sqrt(1.0 - s.alpha_bar(t));
        std::vector<double> eps(x_t.size());
        for (size_t i = 0; i < x_t.size(); ++i) eps[i] = (x_t[i] - a * x0[i]) / b;
        return eps;
    };

    SampleRequest req{2, 50, 0.0, 77};
    auto run1 = sample(denoise, s, req, 8, 8);
    auto run2 = sample(denoise, s, req, 8, 8);
    for (int i = 0; i < 2; ++i)
        expect(run1[i].pixels == run2[i].pixels, "eta=0 sampling not bit-deterministic");
    for (const auto& img : run1)
        for (size_t i = 0; i < 64; ++i)
            expect(std::abs(img.pixels[i] - (x0[i] + 1.0) / 2.0) < 1e-4 * 0.5,
                   "oracle chain missed x0 (pixel scale)");

    // the same check in signal space, direct chain
    std::vector<double> x(64);
    for (auto& v : x) v = rng.gaussian();
    auto seq = ddim_subsequence(1000, 50);
    for (size_t j = 0; j < seq.size(); ++j) {
        int t = seq[j], t_prev = j + 1 < seq.size() ? seq[j + 1] : 0;
        x = ddim_step(x, denoise(x, t), t, t_prev, 0.0, nullptr, s);
    }
    for (size_t i = 0; i < 64; ++i)
        expect(std::abs(x[i] - x0[i]) < 1e-4, "signal-space chain error >= 1e-4");
}

// ---- criterion 7: diffusion smoke training ----

void criterion_diffusion_smoke() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1007);
    std::vector<GrayImage> data;
    for (int i = 0; i < 200; ++i) data.push_back(make_shape_image(i % 5, 16, rng));

    DiffusionTrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch = 8;
    cfg.lr = 1e-3;
    cfg.seed = 7;
    cfg.timesteps = 1000;
    cfg.net = {16, 64};

    TrainedDenoiser t = train_denoiser(data, cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(t.epoch_loss.size() == 5, "expected 5 epochs");
    expect(t.epoch_loss[4] < 0.5 * t.epoch_loss[0],
           "epoch-5 loss " + std::to_string(t.epoch_loss[4]) + " not below half of epoch-1 " +
               std::to_string(t.epoch_loss[0]));
    expect(secs < 600.0, "smoke training took " + std::to_string(secs) + "s (limit 600)");
}

// ---- criterion 8: classifier end to end ----

void criterion_classifier_end_to_end() {
    auto train_data = make_shape_corpus(100, 32, 2024);  // 500 images
    auto test_data = make_shape_corpus(20, 32, 4048);    // 100 images

    ClassifierConfig cfg;  // default 16/32/64/128 at 32x32
    ClassifierModel model = make_classifier(cfg, 11);
    pretrain_backbone(model, make_shape_corpus(40, 32, 7777), 3, 8, 1e-3, 5);

    TrainProtocol protocol;
    protocol.stage1_epochs = 5;
    protocol.stage2_epochs = 5;  // 10 total
    protocol.batch = 8;
    protocol.lr = 1e-3;
    protocol.seed = 3;

    std::map<std::string, uint64_t> before;
    for (const auto& [name, t] : model.params) before[name] = nn::param_checksum(t);
    train_stage1(model, train_data, protocol);
    for (const auto& [name, t] : model.params)
        if (is_backbone_param(name))
            expect(nn::param_checksum(t) == before[name], "stage 1 moved frozen param " + name);

    std::map<std::string, uint64_t> mid;
    for (const auto& [name, t] : model.params) mid[name] = nn::param_checksum(t);
    train_stage2(model, train_data, protocol, {1});
    for (const auto& [name, t] : model.params) {
        int stage = backbone_stage_of(name);
        if (stage >= 0 && stage < kBackboneStages - 1)
            expect(nn::param_checksum(t) == mid[name], "stage 2 moved frozen param " + name);
    }

    int correct = 0;
    for (const auto& s : test_data)
        if (argmax_class(predict(model, s.image)) == s.label) ++correct;
    double acc = static_cast<double>(correct) / test_data.size();
    expect(acc >= 0.95, "test accuracy " + std::to_string(acc) + " < 0.95");
}

// ---- criterion 9: LoRA contracts ----

void criterion_lora() {
    ClassifierConfig cfg;
    cfg.input_size = 32;
    ClassifierModel model = make_classifier(cfg, 21);
    Rng rng(1009);

    GrayImage probe(32, 32);
    for (auto& v : probe.pixels) v = rng.uniform();
    auto base = predict(model, probe);
    apply_lora(model, "head.fc1.w", 16, 31);
    expect(predict(model, probe) == base, "zero-init adapter changed predictions");

    for (auto& v : model.adapters[0].B->value) v = rng.gaussian() * 0.2;
    std::vector<GrayImage> inputs;
    std::vector<std::vector<double>> adapted;
    for (int i = 0; i < 100; ++i) {
        GrayImage img(32, 32);
        for (auto& v : img.pixels) v = rng.uniform();
        inputs.push_back(img);
        adapted.push_back(predict(model, img));
    }
    merge_lora(model);
    for (size_t i = 0; i < inputs.size(); ++i) {
        auto merged = predict(model, inputs[i]);
        for (int c = 0; c < 5; ++c)
            expect(std::abs(merged[c] - adapted[i][c]) < 1e-5,
                   "merged prediction differs beyond 1e-5");
    }
}

// ---- criterion 10: Grad-CAM properties ----

void criterion_grad_cam() {
    for (int trial = 0; trial < 100; ++trial) {
        ClassifierConfig cfg;
        cfg.input_size = 16;
        cfg.stage_channels = {4, 4, 8, 8};
        cfg.head_hidden = 8;
        ClassifierModel model = make_classifier(cfg, 3000 + trial);
        Rng rng(trial);
        GrayImage img(16, 16);
        for (auto& v : img.pixels) v = rng.uniform();
        CamMap cam = grad_cam(model, img, trial % 5, trial % 4);
        for (double w : cam.weights) expect(w >= 0.0, "negative CAM weight");
    }

    // quadrant fixture: identity-ish stages, bright top-left input
    ClassifierConfig cfg;
    cfg.input_size = 32;
    cfg.stage_channels = {4, 4, 4, 4};
    cfg.head_hidden = 8;
    ClassifierModel model = make_classifier(cfg, 0);
    for (int stage = 0; stage < 4; ++stage) {
        std::string s = "backbone.stage" + std::to_string(stage + 1);
        auto& w = model.params.at(s + ".conv.w");
        std::fill(w->value.begin(), w->value.end(), 0.0);
        const int cout = w->shape[0], cin = w->shape[1];
        for (int co = 0; co < cout; ++co)
            for (int ci = 0; ci < cin; ++ci)
                w->value[((static_cast<size_t>(co) * cin + ci) * 3 + 1) * 3 + 1] = 1.0 / cin;
        auto& b = model.params.at(s + ".conv.b")->value;
        std::fill(b.begin(), b.end(), 0.0);
    }
    for (auto& v : model.params.at("head.fc1.w")->value) v = 0.1;
    for (auto& v : model.params.at("head.fc2.w")->value) v = 0.1;

    GrayImage img(32, 32, 0.0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(x, y) = 1.0;
    CamMap cam = grad_cam(model, img, 0, 3);
    double total = std::accumulate(cam.weights.begin(), cam.weights.end(), 0.0);
    expect(total > 0.0, "quadrant fixture produced an empty map");
    double quadrant = 0.0;
    for (int y = 0; y < cam.height / 2; ++y)
        for (int x = 0; x < cam.width / 2; ++x) quadrant += cam.at(x, y);
    expect(quadrant / total >= 0.6,
           "quadrant mass ratio " + std::to_string(quadrant / total) + " < 0.6");

    CamMap a = grad_cam(model, img, 0, 2);
    for (auto& v : model.params.at("head.fc2.b")->value) v += 11.5;
    CamMap b = grad_cam(model, img, 0, 2);
    for (size_t i = 0; i < a.weights.size(); ++i)
        expect(std::abs(a.weights[i] - b.weights[i]) < 1e-9, "logit shift changed the map");
}

// ---- criterion 11: augmentation trend on the imbalanced corpus ----

void criterion_augmentation_trend() {
    fs::path root = "tmp_acceptance_trend";
    fs::remove_all(root);

    double recall_orig_sum = 0.0, recall_aug_sum = 0.0;
    for (uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        fs::path data = root / ("data" + std::to_string(seed));
        write_pseudo_radiograph_tree(data.string(), imbalanced_counts(1600), 16, seed);

        ExperimentSpec spec;
        spec.data_root = data.string();
        spec.seed = seed;
        spec.model.input_size = 16;
        spec.model.stage_channels = {8, 16, 32, 64};
        spec.model.head_hidden = 32;
        spec.clahe = {4, 4, 0.03};
        spec.protocol.stage1_epochs = 3;
        spec.protocol.stage2_epochs = 3;
        spec.protocol.batch = 8;
        spec.protocol.lr = 1e-3;
        spec.freeze.unfreeze_last_k = 2;

        spec.variant = Variant::original;
        spec.work_dir = (root / ("orig" + std::to_string(seed))).string();
        ExperimentResult orig = run_experiment(spec);

        spec.variant = Variant::augmented;
        spec.work_dir = (root / ("aug" + std::to_string(seed))).string();
        spec.diffusion.epochs = 6;
        spec.diffusion.batch = 8;
        spec.diffusion.timesteps = 400;
        spec.diffusion.net = {8, 32};
        spec.diffusion_size = 16;
        spec.sample_request.ddim_steps = 20;
        spec.plan.per_grade_counts = {0, 120, 120, 120, 120};
        spec.upscale_mid = 32;
        spec.upscale_final = 16;
        ExperimentResult aug = run_experiment(spec);

        recall_orig_sum += orig.test.per_class_recall[4];
        recall_aug_sum += aug.test.per_class_recall[4];
        std::printf("  seed %llu: grade-4 recall %.3f -> %.3f\n",
                    static_cast<unsigned long long>(seed), orig.test.per_class_recall[4],
                    aug.test.per_class_recall[4]);
    }
    fs::remove_all(root);
    double mean_orig = recall_orig_sum / 3.0, mean_aug = recall_aug_sum / 3.0;
    expect(mean_aug >= mean_orig + 0.05,
           "mean minority recall " + std::to_string(mean_aug) + " vs original " +
               std::to_string(mean_orig) + " (needs +0.05)");
}

// ---- criterion 12: report layout golden ----

void criterion_report_golden() {
    auto fixture = [](int percent) {
        std::vector<int> preds, labels;
        for (int i = 0; i < 100; ++i) {
            labels.push_back(i % 5);
            preds.push_back(i < percent ? i % 5 : (i % 5 + 1) % 5);
        }
        return confusion(preds, labels);
    };
    ExperimentReport report;
    add_result(report, "EfficientNet B3", Variant::original, fixture(68), fixture(68));
    add_result(report, "EfficientNet B3", Variant::preprocessed, fixture(76), fixture(76));
    add_result(report, "EfficientNet B3", Variant::augmented, fixture(84), fixture(84));
    const std::string want =
        "| Model | Original | Preprocessed | Augmented |\n"
        "| --- | --- | --- | --- |\n"
        "| EfficientNet B3 | 68% | 76% | 84% |\n";
    expect(emit_report(report, "markdown") == want, "markdown layout deviates from the golden");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<void()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "CLAHE oracle equivalence", criterion_clahe_oracle},
        {2, "CLAHE contrast gain", criterion_clahe_contrast},
        {3, "resampling identity, chain and kernel", criterion_resampling},
        {4, "autodiff finite-difference checks", criterion_autodiff},
        {5, "diffusion forward statistics", criterion_forward_stats},
        {6, "DDIM oracle chain determinism", criterion_ddim_oracle},
        {7, "diffusion smoke training", criterion_diffusion_smoke},
        {8, "classifier end to end", criterion_classifier_end_to_end},
        {9, "LoRA zero-init and merge", criterion_lora},
        {10, "Grad-CAM properties", criterion_grad_cam},
        {11, "augmentation trend", criterion_augmentation_trend},
        {12, "report layout golden", criterion_report_golden},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.run();
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("PASS %2d %s (%.1fs)\n", c.id, c.name, secs);
        } catch (const std::exception& e) {
            std::printf("FAIL %2d %s: %s\n", c.id, c.name, e.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
