// Command-line front end for the grading pipeline. Subcommands mirror the
// pipeline stages; `experiment` composes them end to end.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "koa/clahe.hpp"
#include "koa/classifier.hpp"
#include "koa/dataset.hpp"
#include "koa/diffusion.hpp"
#include "koa/explain.hpp"
#include "koa/harness.hpp"
#include "koa/resample.hpp"
#include "koa/synth.hpp"

namespace fs = std::filesystem;
using namespace koa;

namespace {

std::string resolve_data_root(const CLI::Option* opt, const std::string& value) {
    if (opt->count() > 0) return value;  // flag or config file
    if (const char* env = std::getenv("OA_DATA_ROOT")) return env;
    return value;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << text;
}

Manifest manifest_for(const std::string& manifest_path, const std::string& data_root,
                      uint64_t seed) {
    if (!manifest_path.empty()) return read_manifest(manifest_path);
    if (data_root.empty())
        throw CLI::ValidationError("--data-root (or OA_DATA_ROOT) or --manifest is required");
    return stratified_split(scan_tree(data_root), {}, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knee osteoarthritis severity grading pipeline"};
    app.set_config("--config", "", "INI config file with [subcommand] sections");
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic data tree");
    std::string synth_out, synth_kind = "radiographs";
    int synth_total = 1600, synth_size = 64;
    uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output tree root")->required();
    synth->add_option("--kind", synth_kind, "shapes | radiographs");
    synth->add_option("--total", synth_total, "approximate total image count");
    synth->add_option("--size", synth_size, "image side length");
    synth->add_option("--seed", synth_seed);
    synth->callback([&] {
        if (synth_kind == "radiographs") {
            write_pseudo_radiograph_tree(synth_out, imbalanced_counts(synth_total), synth_size,
                                         synth_seed);
        } else if (synth_kind == "shapes") {
            Rng rng(synth_seed);
            int per_class = std::max(1, synth_total / 5);
            for (int grade = 0; grade < 5; ++grade) {
                fs::create_directories(fs::path(synth_out) / std::to_string(grade));
                for (int i = 0; i < per_class; ++i) {
                    char name[16];
                    std::snprintf(name, sizeof(name), "%05d.pgm", i);
                    write_pgm(make_shape_image(grade, synth_size, rng),
                              (fs::path(synth_out) / std::to_string(grade) / name).string());
                }
            }
        } else {
            throw CLI::ValidationError("--kind must be shapes or radiographs");
        }
        std::cout << "wrote " << synth_out << "\n";
    });

    // ---- prep ----
    auto* prep = app.add_subcommand("prep", "batch CLAHE preprocessing");
    std::string prep_root, prep_out;
    ClaheParams prep_params;
    auto* prep_root_opt = prep->add_option("--data-root", prep_root, "input tree root");
    prep->add_option("--out", prep_out, "output tree root")->required();
    prep->add_option("--tile-width", prep_params.tile_width);
    prep->add_option("--tile-height", prep_params.tile_height);
    prep->add_option("--clip-limit", prep_params.clip_limit);
    prep->callback([&] {
        prep_root = resolve_data_root(prep_root_opt, prep_root);
        Manifest m = scan_tree(prep_root);
        int done = 0;
        for (const Sample& s : m.samples) {
            fs::path out_dir = fs::path(prep_out) / std::to_string(s.grade);
            fs::create_directories(out_dir);
            write_pgm(clahe(read_pgm(s.image_ref), prep_params),
                      (out_dir / fs::path(s.image_ref).filename()).string());
            ++done;
        }
        std::cout << "preprocessed " << done << " images into " << prep_out << "\n";
    });

    // ---- diff-train ----
    auto* dtrain = app.add_subcommand("diff-train", "train a per-grade denoiser");
    std::string dt_root, dt_out;
    int dt_grade = 1, dt_size = 64, dt_base = 32;
    DiffusionTrainConfig dt_cfg;
    auto* dt_root_opt = dtrain->add_option("--data-root", dt_root, "grade tree root");
    dtrain->add_option("--grade", dt_grade)->check(CLI::Range(0, 4));
    dtrain->add_option("--out", dt_out, "checkpoint path")->required();
    dtrain->add_option("--size", dt_size, "training resolution");
    dtrain->add_option("--epochs", dt_cfg.epochs);
    dtrain->add_option("--batch", dt_cfg.batch);
    dtrain->add_option("--lr", dt_cfg.lr);
    dtrain->add_option("--seed", dt_cfg.seed);
    dtrain->add_option("--timesteps", dt_cfg.timesteps);
    dtrain->add_option("--base-channels", dt_base);
    dtrain->callback([&] {
        dt_root = resolve_data_root(dt_root_opt, dt_root);
        if (dt_root.empty()) throw CLI::ValidationError("--data-root or OA_DATA_ROOT required");
        dt_cfg.net.base_channels = dt_base;
        Manifest m = scan_tree(dt_root);
        std::vector<GrayImage> images;
        for (const Sample& s : m.samples)
            if (s.grade == dt_grade)
                images.push_back(
                    resize(read_pgm(s.image_ref), dt_size, dt_size, ResampleFilter::lanczos3));
        TrainedDenoiser t = train_denoiser(images, dt_cfg);
        save_denoiser(t, dt_out);
        std::cout << "trained on " << images.size() << " grade-" << dt_grade << " images; ";
        if (!t.epoch_loss.empty())
            std::cout << "epoch loss " << t.epoch_loss.front() << " -> " << t.epoch_loss.back();
        std::cout << "\nsaved " << dt_out << "\n";
    });

    // ---- diff-sample ----
    auto* dsample = app.add_subcommand("diff-sample", "generate images with a trained denoiser");
    std::string ds_model, ds_out;
    int ds_size = 64;
    SampleRequest ds_req;
    dsample->add_option("--model", ds_model, "denoiser checkpoint")->required();
    dsample->add_option("--out", ds_out, "output directory")->required();
    dsample->add_option("--count", ds_req.count);
    dsample->add_option("--ddim-steps", ds_req.ddim_steps);
    dsample->add_option("--eta", ds_req.eta);
    dsample->add_option("--seed", ds_req.seed);
    dsample->add_option("--size", ds_size, "image side length");
    dsample->callback([&] {
        TrainedDenoiser t = load_denoiser(ds_model);
        auto images = sample(t.net.predictor(ds_size, ds_size), t.schedule, ds_req, ds_size, ds_size);
        fs::create_directories(ds_out);
        for (size_t i = 0; i < images.size(); ++i) {
            char name[16];
            std::snprintf(name, sizeof(name), "%05zu.pgm", i);
            write_pgm(images[i], (fs::path(ds_out) / name).string());
        }
        std::cout << "wrote " << images.size() << " images to " << ds_out << "\n";
    });

    // ---- upscale ----
    auto* upscale = app.add_subcommand("upscale", "64 -> 256 -> 224 resolution chain");
    std::string up_in, up_out, up_cmd;
    int up_mid = 256, up_final = 224;
    upscale->add_option("--in", up_in, "input directory")->required();
    upscale->add_option("--out", up_out, "output directory")->required();
    upscale->add_option("--command", up_cmd, "external upscaler template with {in} and {out}");
    upscale->add_option("--mid", up_mid, "intermediate side length");
    upscale->add_option("--final", up_final, "final side length");
    upscale->callback([&] {
        UpscaleResult r = external_upscale(up_in, up_out, up_cmd, up_mid, up_final);
        std::cout << "processed " << r.processed << " image(s)";
        if (!r.failures.empty()) {
            std::cout << ", " << r.failures.size() << " failure(s):\n";
            for (const auto& f : r.failures) std::cout << "  " << f << "\n";
        } else {
            std::cout << "\n";
        }
    });

    // ---- assemble ----
    auto* assemble = app.add_subcommand("assemble", "append generated images to a manifest");
    std::string as_manifest, as_generated, as_out;
    int as_per_class = 200;
    assemble->add_option("--manifest", as_manifest, "base manifest")->required();
    assemble->add_option("--generated", as_generated, "generated tree root")->required();
    assemble->add_option("--out", as_out, "output manifest")->required();
    assemble->add_option("--per-class-count", as_per_class, "generated images per grade 1..4");
    assemble->callback([&] {
        Manifest base = read_manifest(as_manifest);
        AugmentPlan plan;
        for (int g = 1; g <= 4; ++g) plan.per_grade_counts[g] = as_per_class;
        Manifest out = assemble_augmented(base, as_generated, plan);
        write_manifest(out, as_out);
        std::cout << "assembled " << out.samples.size() << " samples into " << as_out << "\n";
    });

    // ---- pretrain ----
    auto* pretrain = app.add_subcommand("pretrain", "proxy-task backbone pretraining");
    std::string pt_out;
    int pt_per_class = 100, pt_size = 32, pt_epochs = 5, pt_batch = 8;
    double pt_lr = 1e-3;
    uint64_t pt_seed = 0;
    pretrain->add_option("--out", pt_out, "checkpoint path")->required();
    pretrain->add_option("--per-class", pt_per_class);
    pretrain->add_option("--input-size", pt_size);
    pretrain->add_option("--epochs", pt_epochs);
    pretrain->add_option("--batch", pt_batch);
    pretrain->add_option("--lr", pt_lr);
    pretrain->add_option("--seed", pt_seed);
    pretrain->callback([&] {
        ClassifierConfig cfg;
        cfg.input_size = pt_size;
        ClassifierModel model = make_classifier(cfg, pt_seed);
        auto proxy = make_shape_corpus(pt_per_class, pt_size, pt_seed + 1);
        auto stats = pretrain_backbone(model, proxy, pt_epochs, pt_batch, pt_lr, pt_seed + 2);
        save_classifier(model, pt_out);
        std::cout << "proxy accuracy " << (stats.empty() ? 0.0 : stats.back().accuracy)
                  << "; saved " << pt_out << "\n";
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "two-stage fine-tuning");
    std::string tr_root, tr_manifest, tr_out, tr_pretrained, tr_manifest_out;
    int tr_input = 32, tr_unfreeze = 1, tr_lora = 0;
    TrainProtocol tr_protocol;
    int tr_stage1 = 5, tr_stage2 = 5;
    auto* tr_root_opt = train->add_option("--data-root", tr_root, "image tree root");
    train->add_option("--manifest", tr_manifest, "existing manifest (skips the split)");
    train->add_option("--out", tr_out, "checkpoint path")->required();
    train->add_option("--manifest-out", tr_manifest_out, "write the split manifest here");
    train->add_option("--pretrained", tr_pretrained, "backbone checkpoint to start from");
    train->add_option("--input-size", tr_input);
    train->add_option("--unfreeze-last", tr_unfreeze, "stages to thaw in stage 2");
    train->add_option("--lora-rank", tr_lora, "0 disables adapters");
    train->add_option("--epochs-stage1", tr_stage1);
    train->add_option("--epochs-stage2", tr_stage2);
    train->add_option("--batch", tr_protocol.batch);
    train->add_option("--lr", tr_protocol.lr);
    train->add_option("--seed", tr_protocol.seed);
    train->callback([&] {
        tr_root = resolve_data_root(tr_root_opt, tr_root);
        Manifest manifest = manifest_for(tr_manifest, tr_root, tr_protocol.seed);
        tr_protocol.stage1_epochs = tr_stage1;
        tr_protocol.stage2_epochs = tr_stage2;

        ClassifierConfig cfg;
        cfg.input_size = tr_input;
        ClassifierModel model = make_classifier(cfg, tr_protocol.seed);
        if (!tr_pretrained.empty()) {
            ClassifierModel pre = load_classifier(tr_pretrained);
            for (auto& [name, t] : model.params)
                if (is_backbone_param(name)) t->value = pre.params.at(name)->value;
        }
        if (tr_lora > 0) apply_lora(model, "head.fc1.w", tr_lora, tr_protocol.seed + 7);

        auto data = load_split(manifest, Split::train, tr_input);
        auto s1 = train_stage1(model, data, tr_protocol);
        auto s2 = train_stage2(model, data, tr_protocol, {tr_unfreeze});
        save_classifier(model, tr_out);
        if (!tr_manifest_out.empty()) write_manifest(manifest, tr_manifest_out);
        std::cout << "stage-1 acc " << (s1.empty() ? 0.0 : s1.back().accuracy) << ", stage-2 acc "
                  << (s2.empty() ? 0.0 : s2.back().accuracy) << "; saved " << tr_out << "\n";
    });

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_ckpt, ev_root, ev_manifest, ev_split = "test", ev_out;
    uint64_t ev_seed = 0;
    eval->add_option("--checkpoint", ev_ckpt)->required();
    auto* ev_root_opt = eval->add_option("--data-root", ev_root);
    eval->add_option("--manifest", ev_manifest);
    eval->add_option("--split", ev_split, "train | test | valid");
    eval->add_option("--seed", ev_seed, "split seed when scanning a tree");
    eval->add_option("--out", ev_out, "metrics file");
    eval->callback([&] {
        ev_root = resolve_data_root(ev_root_opt, ev_root);
        Manifest manifest = manifest_for(ev_manifest, ev_root, ev_seed);
        ClassifierModel model = load_classifier(ev_ckpt);
        std::vector<int> preds, labels;
        Split split = parse_split(ev_split);
        for (const Sample& s : manifest.samples) {
            if (s.split != split) continue;
            LabeledImage li = load_sample(s, model.config.input_size);
            preds.push_back(argmax_class(predict(model, li.image)));
            labels.push_back(li.label);
        }
        Metrics m = confusion(preds, labels);
        std::string text = format_metrics(m);
        if (!ev_out.empty()) write_text(ev_out, text);
        std::cout << text << "accuracy " << m.accuracy << ", macro F1 " << m.macro_f1 << " on "
                  << m.total << " samples\n";
    });

    // ---- gradcam ----
    auto* gradcam_cmd = app.add_subcommand("gradcam", "attention-map overlay for one image");
    std::string gc_ckpt, gc_image, gc_out;
    int gc_class = -1, gc_layer = 3;
    double gc_blend = 0.5;
    gradcam_cmd->add_option("--checkpoint", gc_ckpt)->required();
    gradcam_cmd->add_option("--image", gc_image)->required();
    gradcam_cmd->add_option("--class", gc_class, "target class; -1 = predicted class");
    gradcam_cmd->add_option("--layer", gc_layer, "backbone stage, 0..3")->check(CLI::Range(0, 3));
    gradcam_cmd->add_option("--blend", gc_blend)->check(CLI::Range(0.0, 1.0));
    gradcam_cmd->add_option("--out", gc_out, "output PPM path")->required();
    gradcam_cmd->callback([&] {
        ClassifierModel model = load_classifier(gc_ckpt);
        GrayImage img = read_pgm(gc_image);
        int target = gc_class;
        if (target < 0) target = argmax_class(predict(model, img));
        CamMap cam = grad_cam(model, img, target, gc_layer);
        write_ppm(overlay(img, cam, gc_blend), gc_out);
        std::cout << "class " << target << " attention written to " << gc_out << "\n";
    });

    // ---- experiment ----
    auto* experiment = app.add_subcommand("experiment", "run (model, variant) cells end to end");
    ExperimentSpec ex;
    std::string ex_variant = "all";
    int ex_stage1 = 5, ex_stage2 = 5, ex_per_class = 200, ex_unfreeze = 1;
    auto* ex_root_opt = experiment->add_option("--data-root", ex.data_root);
    experiment->add_option("--work-dir", ex.work_dir)->required();
    experiment->add_option("--variant", ex_variant, "original | preprocessed | augmented | all");
    experiment->add_option("--model-name", ex.model_name);
    experiment->add_option("--seed", ex.seed);
    experiment->add_option("--input-size", ex.model.input_size);
    experiment->add_option("--tile-width", ex.clahe.tile_width);
    experiment->add_option("--tile-height", ex.clahe.tile_height);
    experiment->add_option("--clip-limit", ex.clahe.clip_limit);
    experiment->add_option("--epochs-stage1", ex_stage1);
    experiment->add_option("--epochs-stage2", ex_stage2);
    experiment->add_option("--batch", ex.protocol.batch);
    experiment->add_option("--lr", ex.protocol.lr);
    experiment->add_option("--unfreeze-last", ex_unfreeze);
    experiment->add_option("--lora-rank", ex.lora_rank);
    experiment->add_option("--pretrained", ex.pretrained_checkpoint);
    experiment->add_option("--timesteps", ex.diffusion.timesteps);
    experiment->add_option("--diffusion-epochs", ex.diffusion.epochs);
    experiment->add_option("--diffusion-size", ex.diffusion_size);
    experiment->add_option("--ddim-steps", ex.sample_request.ddim_steps);
    experiment->add_option("--eta", ex.sample_request.eta);
    experiment->add_option("--per-class-count", ex_per_class, "generated images per grade 1..4");
    experiment->add_option("--upscale-command", ex.upscale_command);
    experiment->callback([&] {
        ex.data_root = resolve_data_root(ex_root_opt, ex.data_root);
        if (ex.data_root.empty()) throw CLI::ValidationError("--data-root or OA_DATA_ROOT required");
        ex.protocol.stage1_epochs = ex_stage1;
        ex.protocol.stage2_epochs = ex_stage2;
        ex.freeze.unfreeze_last_k = ex_unfreeze;
        for (int g = 1; g <= 4; ++g) ex.plan.per_grade_counts[g] = ex_per_class;

        std::vector<Variant> variants;
        if (ex_variant == "all")
            variants = {Variant::original, Variant::preprocessed, Variant::augmented};
        else
            variants = {parse_variant(ex_variant)};

        ExperimentReport report;
        for (Variant v : variants) {
            ExperimentSpec spec = ex;
            spec.variant = v;
            spec.work_dir = (fs::path(ex.work_dir) / to_string(v)).string();
            ExperimentResult r = run_experiment(spec);
            add_result(report, ex.model_name, v, r.test, r.valid);
            fs::create_directories(ex.work_dir);
            write_text((fs::path(ex.work_dir) / (ex.model_name + "__" + to_string(v) + ".metrics"))
                           .string(),
                       format_metrics(r.test));
            write_text((fs::path(ex.work_dir) /
                        (ex.model_name + "__" + to_string(v) + ".valid.metrics"))
                           .string(),
                       format_metrics(r.valid));
            std::cout << to_string(v) << ": test accuracy " << r.test.accuracy << ", valid accuracy "
                      << r.valid.accuracy << "\n";
        }
        write_text((fs::path(ex.work_dir) / "report.md").string(), emit_report(report, "markdown"));
        write_text((fs::path(ex.work_dir) / "report.csv").string(), emit_report(report, "csv"));
        std::cout << emit_report(report, "markdown");
    });

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "format stored metrics as a table");
    std::string rp_dir, rp_format = "markdown", rp_out;
    report_cmd->add_option("--metrics-dir", rp_dir, "directory of <model>__<variant>.metrics files")
        ->required();
    report_cmd->add_option("--format", rp_format, "markdown | csv");
    report_cmd->add_option("--out", rp_out, "output file (stdout when omitted)");
    report_cmd->callback([&] {
        ExperimentReport report;
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(rp_dir))
            if (f.path().extension() == ".metrics" &&
                f.path().stem().extension() != ".valid")
                files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::string stem = f.stem().string();
            auto sep = stem.rfind("__");
            if (sep == std::string::npos) continue;
            std::ifstream in(f);
            std::stringstream ss;
            ss << in.rdbuf();
            Metrics m = parse_metrics(ss.str());
            add_result(report, stem.substr(0, sep), parse_variant(stem.substr(sep + 2)), m, m);
        }
        std::string text = emit_report(report, rp_format);
        if (rp_out.empty())
            std::cout << text;
        else
            write_text(rp_out, text);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
