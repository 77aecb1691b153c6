#include "koa/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "koa/resample.hpp"

namespace fs = std::filesystem;

namespace koa {

namespace {

Metrics metrics_from_confusion(const std::array<std::array<int, kNumGrades>, kNumGrades>& conf) {
    Metrics m;
    m.confusion = conf;
    int trace = 0;
    for (int c = 0; c < kNumGrades; ++c) trace += conf[c][c];
    for (int r = 0; r < kNumGrades; ++r)
        for (int c = 0; c < kNumGrades; ++c) m.total += conf[r][c];
    m.accuracy = m.total > 0 ? static_cast<double>(trace) / m.total : 0.0;

    double f1_sum = 0.0;
    for (int c = 0; c < kNumGrades; ++c) {
        int tp = conf[c][c], fn = 0, fp = 0;
        for (int o = 0; o < kNumGrades; ++o) {
            if (o == c) continue;
            fn += conf[c][o];
            fp += conf[o][c];
        }
        double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        m.per_class_recall[c] = recall;
        f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    m.macro_f1 = f1_sum / kNumGrades;
    return m;
}

}  // namespace

Metrics confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("confusion: prediction/label length mismatch");
    std::array<std::array<int, kNumGrades>, kNumGrades> conf{};
    for (size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= kNumGrades || preds[i] < 0 || preds[i] >= kNumGrades)
            throw std::invalid_argument("confusion: grade out of range 0..4");
        ++conf[labels[i]][preds[i]];
    }
    return metrics_from_confusion(conf);
}

std::string format_metrics(const Metrics& m) {
    std::ostringstream os;
    os << "metrics v1\n";
    os << "# accuracy " << m.accuracy << " macro_f1 " << m.macro_f1 << "\n";
    for (int r = 0; r < kNumGrades; ++r) {
        for (int c = 0; c < kNumGrades; ++c) os << (c ? " " : "") << m.confusion[r][c];
        os << "\n";
    }
    return os.str();
}

Metrics parse_metrics(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "metrics v1")
        throw std::runtime_error("parse_metrics: bad header");
    std::array<std::array<int, kNumGrades>, kNumGrades> conf{};
    int row = 0;
    while (row < kNumGrades && std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        for (int c = 0; c < kNumGrades; ++c)
            if (!(ls >> conf[row][c])) throw std::runtime_error("parse_metrics: bad row");
        ++row;
    }
    if (row != kNumGrades) throw std::runtime_error("parse_metrics: truncated confusion matrix");
    return metrics_from_confusion(conf);
}

void add_result(ExperimentReport& report, const std::string& model, Variant variant,
                const Metrics& test, const Metrics& valid) {
    for (auto& row : report.rows)
        if (row.model == model) {
            row.cells[static_cast<int>(variant)] = {true, test, valid};
            return;
        }
    ReportRow row;
    row.model = model;
    row.cells[static_cast<int>(variant)] = {true, test, valid};
    report.rows.push_back(std::move(row));
}

int accuracy_percent(const Metrics& m) {
    if (m.total <= 0) return 0;
    long trace = 0;
    for (int c = 0; c < kNumGrades; ++c) trace += m.confusion[c][c];
    return static_cast<int>(100 * trace / m.total);  // truncates toward zero
}

std::string emit_report(const ExperimentReport& report, const std::string& format) {
    std::ostringstream os;
    if (format == "markdown") {
        os << "| Model | Original | Preprocessed | Augmented |\n";
        os << "| --- | --- | --- | --- |\n";
        for (const auto& row : report.rows) {
            os << "| " << row.model;
            for (int v = 0; v < 3; ++v) {
                if (row.cells[v].present)
                    os << " | " << accuracy_percent(row.cells[v].test) << "%";
                else
                    os << " | -";
            }
            os << " |\n";
        }
        return os.str();
    }
    if (format == "csv") {
        os << "Model,Original,Preprocessed,Augmented\n";
        for (const auto& row : report.rows) {
            os << row.model;
            for (int v = 0; v < 3; ++v) {
                if (row.cells[v].present)
                    os << "," << accuracy_percent(row.cells[v].test);
                else
                    os << ",";
            }
            os << "\n";
        }
        return os.str();
    }
    throw std::invalid_argument("emit_report: format must be markdown or csv");
}

namespace {

std::string substitute(const std::string& tmpl, const std::string& key, const std::string& value) {
    std::string out = tmpl;
    size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
        out.replace(pos, key.size(), value);
        pos += value.size();
    }
    return out;
}

}  // namespace

UpscaleResult external_upscale(const std::string& dir_in, const std::string& dir_out,
                               const std::string& command_template, int mid_size, int final_size) {
    if (!command_template.empty() &&
        (command_template.find("{in}") == std::string::npos ||
         command_template.find("{out}") == std::string::npos))
        throw std::invalid_argument("external_upscale: command template needs {in} and {out}");

    fs::create_directories(dir_out);
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir_in))
        if (f.is_regular_file() && f.path().extension() == ".pgm") files.push_back(f.path());
    std::sort(files.begin(), files.end());

    UpscaleResult result;
    for (const auto& in_path : files) {
        fs::path out_path = fs::path(dir_out) / in_path.filename();
        try {
            if (command_template.empty()) {
                GrayImage img = read_pgm(in_path.string());
                GrayImage mid = resize(img, mid_size, mid_size, ResampleFilter::lanczos3);
                write_pgm(resize(mid, final_size, final_size, ResampleFilter::lanczos3),
                          out_path.string());
            } else {
                std::string cmd = substitute(
                    substitute(command_template, "{in}", in_path.string()), "{out}",
                    out_path.string());
                int rc = std::system(cmd.c_str());
                if (rc != 0) throw std::runtime_error("command exited with status " +
                                                      std::to_string(rc));
                GrayImage mid = read_pgm(out_path.string());
                write_pgm(resize(mid, final_size, final_size, ResampleFilter::lanczos3),
                          out_path.string());
            }
            ++result.processed;
        } catch (const std::exception& e) {
            result.failures.push_back(in_path.filename().string() + ": " + e.what());
        }
    }
    return result;
}

LabeledImage load_sample(const Sample& sample, int input_size) {
    GrayImage img = read_pgm(sample.image_ref);
    if (img.width != input_size || img.height != input_size)
        img = resize(img, input_size, input_size, ResampleFilter::lanczos3);
    return {std::move(img), sample.grade};
}

std::vector<LabeledImage> load_split(const Manifest& manifest, Split split, int input_size) {
    std::vector<LabeledImage> out;
    for (const Sample& s : manifest.samples)
        if (s.split == split) out.push_back(load_sample(s, input_size));
    return out;
}

namespace {

Metrics evaluate_split(const ClassifierModel& model, const Manifest& manifest, Split split) {
    std::vector<int> preds, labels;
    for (const Sample& s : manifest.samples) {
        if (s.split != split) continue;
        LabeledImage li = load_sample(s, model.config.input_size);
        preds.push_back(argmax_class(predict(model, li.image)));
        labels.push_back(li.label);
    }
    return confusion(preds, labels);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    fs::create_directories(spec.work_dir);

    Manifest manifest = scan_tree(spec.data_root);
    manifest = stratified_split(manifest, SplitRatios{}, spec.seed);

    if (spec.variant != Variant::original) {
        // per-image CLAHE into the work tree; all splits see the same transform
        fs::path prep_root = fs::path(spec.work_dir) / "preprocessed";
        for (Sample& s : manifest.samples) {
            fs::path out_dir = prep_root / std::to_string(s.grade);
            fs::create_directories(out_dir);
            fs::path out_path = out_dir / fs::path(s.image_ref).filename();
            if (!fs::exists(out_path))
                write_pgm(clahe(read_pgm(s.image_ref), spec.clahe), out_path.string());
            s.image_ref = out_path.string();
        }
        manifest.variant = Variant::preprocessed;
    }

    if (spec.variant == Variant::augmented) {
        fs::path gen_root = fs::path(spec.work_dir) / "generated";
        fs::path up_root = fs::path(spec.work_dir) / "upscaled";
        for (int grade = 0; grade < kNumGrades; ++grade) {
            if (spec.plan.per_grade_counts[grade] <= 0) continue;

            std::vector<GrayImage> train_images;
            for (const Sample& s : manifest.samples)
                if (s.grade == grade && s.split == Split::train)
                    train_images.push_back(resize(read_pgm(s.image_ref), spec.diffusion_size,
                                                  spec.diffusion_size, ResampleFilter::lanczos3));
            if (train_images.empty())
                throw std::runtime_error(
                    "run_experiment: no training images to fit the grade-" + std::to_string(grade) +
                    " diffusion model");

            DiffusionTrainConfig dc = spec.diffusion;
            dc.seed = spec.seed + 101 + static_cast<uint64_t>(grade);
            TrainedDenoiser trained = train_denoiser(train_images, dc);

            SampleRequest req = spec.sample_request;
            req.count = spec.plan.per_grade_counts[grade];
            req.seed = spec.seed + 1000000ULL * static_cast<uint64_t>(grade + 1);
            auto images = sample(trained.net.predictor(spec.diffusion_size, spec.diffusion_size),
                                 trained.schedule, req, spec.diffusion_size, spec.diffusion_size);

            fs::path gen_dir = gen_root / std::to_string(grade);
            fs::create_directories(gen_dir);
            for (size_t i = 0; i < images.size(); ++i) {
                char name[16];
                std::snprintf(name, sizeof(name), "%05zu.pgm", i);
                write_pgm(images[i], (gen_dir / name).string());
            }
            auto up = external_upscale((gen_root / std::to_string(grade)).string(),
                                       (up_root / std::to_string(grade)).string(),
                                       spec.upscale_command, spec.upscale_mid, spec.upscale_final);
            if (!up.failures.empty())
                std::fprintf(stderr, "upscale: %zu failure(s) for grade %d\n", up.failures.size(),
                             grade);
        }
        manifest = assemble_augmented(manifest, up_root.string(), spec.plan);
    }

    ClassifierModel model = make_classifier(spec.model, spec.seed);
    if (!spec.pretrained_checkpoint.empty()) {
        ClassifierModel pre = load_classifier(spec.pretrained_checkpoint);
        for (auto& [name, t] : model.params)
            if (is_backbone_param(name)) {
                auto it = pre.params.find(name);
                if (it == pre.params.end() || it->second->shape != t->shape)
                    throw std::runtime_error("run_experiment: pretrained checkpoint mismatch at " +
                                             name);
                t->value = it->second->value;
            }
    }
    if (spec.lora_rank > 0) apply_lora(model, "head.fc1.w", spec.lora_rank, spec.seed + 7);

    TrainProtocol protocol = spec.protocol;
    protocol.seed = spec.seed;
    auto train_data = load_split(manifest, Split::train, spec.model.input_size);
    train_stage1(model, train_data, protocol);
    train_stage2(model, train_data, protocol, spec.freeze);

    ExperimentResult result;
    result.test = evaluate_split(model, manifest, Split::test);
    result.valid = evaluate_split(model, manifest, Split::valid);
    result.manifest = std::move(manifest);
    return result;
}

}  // namespace koa
