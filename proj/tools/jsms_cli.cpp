// jsms: dataset generation, staged training, inference and evaluation for the
// joint semantic/motion segmentation toy pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jsms/checkpoint.hpp"
#include "jsms/context.hpp"
#include "jsms/flow.hpp"
#include "jsms/image_io.hpp"
#include "jsms/init.hpp"
#include "jsms/metrics.hpp"
#include "jsms/net.hpp"
#include "jsms/synth.hpp"
#include "jsms/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jsms;

namespace {

// exit codes: 0 ok, 2 usage, 3 malformed input file, 4 pipeline state
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitState = 4;

void write_manifest(const fs::path& path, const json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot write manifest: " + path.string());
    f << j.dump(2) << "\n";
}

bool parse_size(const std::string& s, int& h, int& w) {
    const size_t x = s.find('x');
    if (x == std::string::npos) return false;
    try {
        h = std::stoi(s.substr(0, x));
        w = std::stoi(s.substr(x + 1));
    } catch (...) {
        return false;
    }
    return h > 0 && w > 0;
}

int cmd_gen(const std::string& out_dir, int samples, uint64_t seed, int classes,
            const std::string& size, bool force) {
    int h = 64, w = 64;
    if (!parse_size(size, h, w)) {
        std::cerr << "gen: --size must look like 64x64\n";
        return kExitUsage;
    }
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
        std::cerr << "gen: output directory " << out_dir
                  << " is not empty; pass --force to overwrite\n";
        return kExitUsage;
    }
    auto data = generate_dataset(samples, h, w, classes, seed);
    Palette palette = default_palette(classes);
    write_dataset(out_dir, data, palette);
    int train = 0;
    for (const auto& s : data) train += s.is_train;
    write_manifest(fs::path(out_dir) / "manifest.json",
                   json{{"command", "gen"},
                        {"samples", samples},
                        {"train", train},
                        {"val", samples - train},
                        {"height", h},
                        {"width", w},
                        {"classes", classes},
                        {"seed", seed}});
    std::cout << "wrote " << samples << " samples (" << train << " train) to " << out_dir << "\n";
    return 0;
}

int stage_id(Stage s) {
    switch (s) {
        case Stage::Baseline:
            return kStageBaseline;
        case Stage::Joint:
            return kStageJoint;
        case Stage::JointContext:
            return kStageJointContext;
    }
    return kStageBaseline;
}

int cmd_train(const std::string& stage_name, const std::string& data_dir,
              const std::string& init_path, const std::string& out_path, int iters, double lr,
              double momentum, int crop, uint64_t seed) {
    const Stage stage = stage_from_string(stage_name);
    Dataset data = load_dataset(data_dir);
    if (data.train.empty()) throw StateError("train: dataset has no training samples");
    const int classes = data.palette.num_classes();

    NetworkSpec spec = build_front_end(Preset::Toy, classes);
    NetworkState state;
    bool transferred = false;

    if (stage == Stage::Baseline) {
        if (init_path.empty()) {
            state = init_state(spec, seed);
        } else {
            state = load_checkpoint(init_path, spec);
        }
    } else {
        if (init_path.empty()) {
            throw StateError("train: stage '" + stage_name +
                             "' needs --init with the previous stage's checkpoint");
        }
        LoadedCheckpoint ck = read_checkpoint(init_path);
        if (!ck.meta) throw StateError("train: checkpoint " + init_path + " has no metadata");
        const int want_prev = stage == Stage::Joint ? kStageBaseline : kStageJoint;
        if (ck.meta->stage != want_prev) {
            throw StateError("train: stage '" + stage_name + "' expects a checkpoint from stage " +
                             std::to_string(want_prev) + ", got stage " +
                             std::to_string(ck.meta->stage));
        }
        if (ck.meta->num_classes == classes) {
            state = load_checkpoint(init_path, spec);
        } else if (stage == Stage::Joint && ck.meta->num_classes < classes) {
            // semantics-only checkpoint: extend the head with motion channels
            NetworkSpec source = build_front_end(ck.meta->preset, ck.meta->num_classes);
            NetworkState src_state = load_checkpoint(init_path, source);
            TransferPlan plan;
            plan.source_spec = &source;
            plan.source_state = &src_state;
            plan.target_spec = &spec;
            plan.semantic_classes = ck.meta->num_classes;
            plan.motion_classes = classes - ck.meta->num_classes;
            state = transfer_extend_head(plan, seed);
            transferred = true;
        } else {
            throw StateError("train: checkpoint has " + std::to_string(ck.meta->num_classes) +
                             " classes but the dataset has " + std::to_string(classes));
        }
        if (stage == Stage::JointContext) insert_context(spec, state);
    }

    TrainConfig cfg;
    cfg.stage = stage;
    cfg.iterations = iters;
    cfg.learning_rate = static_cast<float>(lr);
    cfg.momentum = static_cast<float>(momentum);
    cfg.crop_size = crop;
    cfg.seed = seed;
    StageResult result = run_stage(cfg, spec, state, data.train);

    fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_checkpoint(spec, state, stage_id(stage), out_path);

    const fs::path log_path = out_path + ".loss.tsv";
    std::ofstream log(log_path, std::ios::trunc);
    log << "iteration\tloss\n";
    for (size_t i = 0; i < result.loss_curve.size(); ++i) {
        log << i << "\t" << result.loss_curve[i] << "\n";
    }

    write_manifest(fs::path(out_path + ".manifest.json"),
                   json{{"command", "train"},
                        {"stage", stage_name},
                        {"data", data_dir},
                        {"init", init_path},
                        {"checkpoint", out_path},
                        {"loss_log", log_path.string()},
                        {"iterations", iters},
                        {"learning_rate", lr},
                        {"momentum", momentum},
                        {"crop", crop},
                        {"seed", seed},
                        {"classes", classes},
                        {"head_transferred", transferred},
                        {"final_loss",
                         result.loss_curve.empty() ? json() : json(result.loss_curve.back())}});
    std::cout << "saved " << out_path << " after " << iters << " iterations\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path, const std::string& flow_path,
              const std::string& out_prefix, const std::string& amplify) {
    Pipeline p = load_pipeline(ckpt);
    bool use_amp = p.uses_amplifier();
    if (amplify == "on") use_amp = true;
    if (amplify == "off") use_amp = false;

    ImageU8 img = read_png_rgb(image_path);
    Tensor input = image_to_input(img);

    ForwardOptions opts;
    Tensor amp_feat;
    if (use_amp) {
        if (flow_path.empty()) throw StateError("infer: amplification needs --flow");
        FlowField flow = read_flo(flow_path);
        if (flow.width != img.width || flow.height != img.height) {
            throw DimensionError("infer: flow raster " + std::to_string(flow.width) + "x" +
                                 std::to_string(flow.height) + " does not match the image");
        }
        const int f = p.spec.downsample_factor();
        amp_feat = resize_to_feature_grid(amplifier_from_flow(flow), img.height / f, img.width / f);
        opts.amplifier = &amp_feat;
    }

    LabelMap pred = predict_labels(p.spec, p.state, input, opts);
    Palette palette = default_palette(p.spec.num_classes);

    fs::path prefix(out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    const std::string color_path = out_prefix + "_color.png";
    const std::string idx_path = out_prefix + "_idx.png";
    write_png_rgb(colorize_labels(pred, palette), color_path);
    write_label_map(pred, idx_path);
    write_manifest(fs::path(out_prefix + "_manifest.json"), json{{"command", "infer"},
                                                                 {"checkpoint", ckpt},
                                                                 {"image", image_path},
                                                                 {"flow", flow_path},
                                                                 {"amplified", use_amp},
                                                                 {"stage", p.stage},
                                                                 {"color", color_path},
                                                                 {"indices", idx_path}});
    std::cout << "wrote " << color_path << " and " << idx_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& split,
             const std::string& report_path) {
    Pipeline p = load_pipeline(ckpt);
    Dataset data = load_dataset(data_dir);
    const std::vector<SampleRecord>& samples = split == "train" ? data.train : data.val;
    if (samples.empty()) {
        std::cerr << "eval: split '" << split << "' of " << data_dir << " is empty\n";
        return kExitUsage;
    }
    MetricsReport report = evaluate(p.spec, p.state, p.uses_amplifier(), samples, data.palette);
    const std::string text = report.to_text();
    if (report_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(report_path, std::ios::trunc);
        if (!f) throw FormatError("cannot write report: " + report_path);
        f << text;
        write_manifest(fs::path(report_path + ".manifest.json"),
                       json{{"command", "eval"},
                            {"checkpoint", ckpt},
                            {"data", data_dir},
                            {"split", split},
                            {"samples", samples.size()},
                            {"report", report_path}});
        std::cout << "wrote " << report_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint semantic/motion segmentation pipeline"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic two-frame dataset");
    std::string gen_out;
    int gen_samples = 100;
    uint64_t gen_seed = 1;
    int gen_classes = 6;
    std::string gen_size = "64x64";
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--samples", gen_samples, "number of samples")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--classes", gen_classes, "label taxonomy size")->check(CLI::IsMember({6, 7}));
    gen->add_option("--size", gen_size, "sample size HxW");
    gen->add_flag("--force", gen_force, "overwrite a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "run one training stage");
    std::string tr_stage, tr_data, tr_init, tr_out;
    int tr_iters = 500;
    double tr_lr = 0.01, tr_momentum = 0.9;
    int tr_crop = 64;
    uint64_t tr_seed = 1;
    train->add_option("--stage", tr_stage, "baseline | joint | joint-context")->required();
    train->add_option("--data", tr_data, "dataset directory")->required();
    train->add_option("--init", tr_init, "checkpoint to start from");
    train->add_option("--out", tr_out, "checkpoint to write")->required();
    train->add_option("--iters", tr_iters, "training iterations")
        ->check(CLI::NonNegativeNumber);
    train->add_option("--lr", tr_lr, "learning rate");
    train->add_option("--momentum", tr_momentum, "momentum coefficient");
    train->add_option("--crop", tr_crop, "training crop size");
    train->add_option("--seed", tr_seed, "training seed");

    // infer
    auto* infer = app.add_subcommand("infer", "segment one frame pair");
    std::string in_ckpt, in_image, in_image1, in_flow, in_out, in_amp = "auto";
    infer->add_option("--ckpt", in_ckpt, "pipeline checkpoint")->required();
    infer->add_option("--image-t", in_image, "frame t (png)")->required();
    infer->add_option("--image-t1", in_image1, "frame t+1 (png, unused by the toy flow reader)");
    infer->add_option("--flow", in_flow, "flow field (.flo)");
    infer->add_option("--out", in_out, "output path prefix")->required();
    infer->add_option("--amplify", in_amp, "on | off | auto (follow the checkpoint stage)")
        ->check(CLI::IsMember({"on", "off", "auto"}));

    // eval
    auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset split");
    std::string ev_ckpt, ev_data, ev_split = "val", ev_report;
    eval->add_option("--ckpt", ev_ckpt, "pipeline checkpoint")->required();
    eval->add_option("--data", ev_data, "dataset directory")->required();
    eval->add_option("--split", ev_split, "train | val")->check(CLI::IsMember({"train", "val"}));
    eval->add_option("--report", ev_report, "report file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(gen_out, gen_samples, gen_seed, gen_classes, gen_size, gen_force);
        }
        if (train->parsed()) {
            return cmd_train(tr_stage, tr_data, tr_init, tr_out, tr_iters, tr_lr, tr_momentum,
                             tr_crop, tr_seed);
        }
        if (infer->parsed()) {
            return cmd_infer(in_ckpt, in_image, in_flow, in_out, in_amp);
        }
        if (eval->parsed()) {
            return cmd_eval(ev_ckpt, ev_data, ev_split, ev_report);
        }
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const StateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitState;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitState;
    }
    return 0;
}
