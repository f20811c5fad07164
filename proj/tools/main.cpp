// vitmri: brain-MRI tumor classification pipeline.
//
// Subcommands cover the full workflow: split a class-folder dataset into
// train/val/test, cache CLAHE-preprocessed copies, fine-tune the ViT in two
// stages, evaluate with optional five-view TTA, predict single images, and
// render Attention Rollout overlays. Every command is deterministic given
// the same inputs and seed.

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vitmri/clahe.hpp"
#include "vitmri/config.hpp"
#include "vitmri/dataset.hpp"
#include "vitmri/infer.hpp"
#include "vitmri/metrics.hpp"
#include "vitmri/train.hpp"
#include "vitmri/transforms.hpp"
#include "vitmri/vit.hpp"

namespace fs = std::filesystem;
using namespace vitmri;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file (see `vitmri --help`)");
    cmd->add_option("--set", opts.sets, "override one config key, e.g. --set train.batch_size=16")
        ->take_all();
}

std::string trimmed(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg =
        opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
    for (const std::string& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw UserError("--set expects key=value, got '" + kv + "'");
        apply_config_kv(cfg, trimmed(kv.substr(0, eq)), trimmed(kv.substr(eq + 1)));
    }
    return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

const std::vector<std::string>& class_name_list() {
    static const std::vector<std::string> names(kClassNames.begin(), kClassNames.end());
    return names;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot open for write: " + path.string());
    out << text;
}

// Train/eval read the CLAHE cache written by `preprocess` (the pipeline
// never trains on raw images), so the cached .png names are substituted.
std::vector<ManifestEntry> cache_entries(const RunConfig& cfg, const SplitAssignment& split,
                                         SplitKind kind) {
    if (cfg.cache_root.empty())
        throw UserError(
            "cache_root is not set; run `vitmri preprocess` and point cache_root at its output");
    std::vector<ManifestEntry> entries = split_subset(split, kind);
    for (ManifestEntry& e : entries) e.relative_path = cached_relative_path(e.relative_path);
    return entries;
}

SplitAssignment read_manifest(const RunConfig& cfg) {
    if (cfg.manifest.empty())
        throw UserError("manifest is not set (flag --manifest or config key `manifest`)");
    return read_split_csv(cfg.manifest);
}

// Channel conversion + resize to the exact tensor view the model consumes.
ImageU8 model_view(const ImageU8& img, const ViTConfig& vit) {
    ImageU8 out = to_channels(img, vit.channels);
    if (out.height != vit.image_size || out.width != vit.image_size)
        out = resize_bilinear(out, vit.image_size, vit.image_size);
    return out;
}

Tensor<float> single_batch(const ImageU8& img, const ViTConfig& vit) {
    Tensor<float> t = image_to_tensor(img, vit.image_size, vit.channels);
    return t.reshaped(Shape{1, vit.channels, vit.image_size, vit.image_size});
}

void print_probabilities(const std::vector<double>& probs) {
    for (std::size_t k = 0; k < kNumClasses; ++k)
        std::printf("  %-12s %.6f\n", kClassNames[k], probs[k]);
}

// ---------------------------------------------------------------- commands

int cmd_split(const RunConfig& cfg, const std::string& out_path) {
    if (cfg.data_root.empty())
        throw UserError("data_root is not set (flag --data-root or config key `data_root`)");
    const Manifest manifest = scan_directory(cfg.data_root);
    print_warnings(manifest.warnings);
    const SplitAssignment split = stratified_split(manifest, cfg.split, cfg.seed);

    fs::path out = out_path.empty() ? (cfg.manifest.empty() ? std::string("manifest.csv")
                                                            : cfg.manifest)
                                    : out_path;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_split_csv(split, out);

    std::array<std::array<std::size_t, 3>, kNumClasses> counts{};
    for (const SplitEntry& e : split.entries)
        ++counts[static_cast<std::size_t>(e.label)][static_cast<int>(e.split)];

    std::printf("%-12s %8s %8s %8s %8s\n", "class", "train", "val", "test", "total");
    std::array<std::size_t, 3> totals{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& row = counts[c];
        std::printf("%-12s %8zu %8zu %8zu %8zu\n", kClassNames[c], row[0], row[1], row[2],
                    row[0] + row[1] + row[2]);
        for (std::size_t s = 0; s < 3; ++s) totals[s] += row[s];
    }
    std::printf("%-12s %8zu %8zu %8zu %8zu\n", "total", totals[0], totals[1], totals[2],
                totals[0] + totals[1] + totals[2]);
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

int cmd_preprocess(const RunConfig& cfg, std::size_t threads) {
    if (cfg.data_root.empty())
        throw UserError("data_root is not set (flag --src or config key `data_root`)");
    if (cfg.cache_root.empty())
        throw UserError("cache_root is not set (flag --cache or config key `cache_root`)");
    const SplitAssignment split = read_manifest(cfg);

    Manifest manifest;
    manifest.entries.reserve(split.entries.size());
    for (const SplitEntry& e : split.entries)
        manifest.entries.push_back({e.relative_path, e.label});

    const CacheResult result =
        cache_clahe(manifest, cfg.data_root, cfg.cache_root, cfg.clahe, threads);
    print_warnings(result.warnings);
    std::printf("%zu written\n", result.written);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    cfg.validate();
    const SplitAssignment split = read_manifest(cfg);
    const std::vector<ManifestEntry> train_entries = cache_entries(cfg, split, SplitKind::train);
    const std::vector<ManifestEntry> val_entries = cache_entries(cfg, split, SplitKind::val);

    const ViTConfig vit = cfg.vit();
    RngStream init_rng = RngStream::derive(cfg.seed, "init", 0);
    ParamSet<float> params = init_params<float>(vit, init_rng);
    std::printf("model %s: %zu parameters, %zu train / %zu val images\n", cfg.model.c_str(),
                params.total_elements(), train_entries.size(), val_entries.size());

    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    write_text(out_dir / "config_used.txt", config_to_text(cfg));

    const auto progress = [](const EpochRecord& r) {
        std::printf(
            "stage %d epoch %3zu  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f\n",
            r.stage, r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc);
        std::fflush(stdout);
    };
    const TrainResult result =
        train_two_stage(vit, std::move(params), cfg.cache_root, train_entries, val_entries,
                        cfg.train, cfg.augment, cfg.seed, progress);

    save_params(vit, result.raw, out_dir / "final_raw.ckpt");
    save_params(vit, result.ema, out_dir / "final_ema.ckpt");
    save_params(vit, result.best_ema, out_dir / "best_ema.ckpt");
    write_report_csv(result.report, out_dir / "report.csv");
    write_report_summary(result.report, out_dir / "summary.txt");

    std::printf("%s\n", result.report.stopping_reason.c_str());
    if (!result.report.epochs.empty()) {
        const EpochRecord& best = result.report.epochs[result.report.best_index];
        std::printf("best val_acc %.4f (stage %d epoch %zu)\n", result.report.best_val_acc,
                    best.stage, best.epoch);
    }
    std::printf("wrote %s\n", (out_dir / "best_ema.ckpt").string().c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& split_name,
             bool tta) {
    const auto [vit, params] = load_params(checkpoint);
    const auto kind = split_from_name(split_name);
    if (!kind) throw UserError("unknown split '" + split_name + "' (train|val|test)");
    const SplitAssignment split = read_manifest(cfg);
    const std::vector<ManifestEntry> entries = cache_entries(cfg, split, *kind);
    if (entries.empty()) throw UserError("split '" + split_name + "' is empty");

    std::vector<int> truth, prediction;
    truth.reserve(entries.size());
    prediction.reserve(entries.size());
    bool have_loss = false;
    double loss = 0.0;
    if (tta) {
        for (const ManifestEntry& e : entries) {
            const ImageU8 img =
                model_view(load_image(fs::path(cfg.cache_root) / e.relative_path), vit);
            truth.push_back(static_cast<int>(e.label));
            prediction.push_back(tta_predict(vit, params, img).predicted);
        }
    } else {
        const EvalResult r = evaluate(vit, params, cfg.cache_root, entries,
                                      cfg.train.batch_size, cfg.train.label_smoothing);
        truth = r.truth;
        prediction = r.prediction;
        loss = r.loss;
        have_loss = true;
    }

    const ConfusionMatrix cm = confusion(truth, prediction, kNumClasses);
    const MetricsReport report = aggregates(cm);
    const std::string text = metrics_text(report, class_name_list());

    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    const std::string tag = split_name;
    write_text(out_dir / ("metrics_" + tag + ".txt"), text);
    write_text(out_dir / ("metrics_" + tag + ".csv"), metrics_csv(report, class_name_list()));
    write_text(out_dir / ("confusion_" + tag + ".csv"),
               confusion_csv(cm, class_name_list(), false));
    write_text(out_dir / ("confusion_" + tag + "_normalized.csv"),
               confusion_csv(cm, class_name_list(), true));

    std::printf("%s evaluation (%zu images%s)\n", tag.c_str(), entries.size(),
                tta ? ", five-view TTA" : "");
    std::fputs(text.c_str(), stdout);
    if (have_loss) std::printf("\nloss: %.6f\n", loss);
    std::printf("wrote %s\n", (out_dir / ("metrics_" + tag + ".txt")).string().c_str());
    return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& checkpoint, const std::string& image,
                bool tta) {
    const auto [vit, params] = load_params(checkpoint);
    const ImageU8 pre = clahe(load_image(image), cfg.clahe);

    std::vector<double> probs;
    int predicted = 0;
    if (tta) {
        const TtaResult r = tta_predict(vit, params, model_view(pre, vit));
        probs = r.averaged;
        predicted = r.predicted;
        for (std::size_t v = 0; v < kTtaViewCount; ++v) {
            std::printf("view %-9s", kTtaViewTags[v]);
            for (std::size_t k = 0; k < kNumClasses; ++k)
                std::printf("  %s %.4f", kClassNames[k], r.per_view[v][k]);
            std::printf("\n");
        }
    } else {
        const auto [logits, trace] = forward<float>(vit, params, single_batch(pre, vit),
                                                    Mode::eval, false);
        (void)trace;
        const Tensor<double> p = softmax(logits.cast<double>(), 1);
        probs.assign(p.data(), p.data() + kNumClasses);
        for (std::size_t k = 1; k < kNumClasses; ++k)
            if (probs[k] > probs[static_cast<std::size_t>(predicted)])
                predicted = static_cast<int>(k);
    }

    std::printf("prediction: %s\n", kClassNames[static_cast<std::size_t>(predicted)]);
    std::printf("probabilities%s:\n", tta ? " (averaged over 5 views)" : "");
    print_probabilities(probs);
    return 0;
}

int cmd_rollout(const RunConfig& cfg, const std::string& checkpoint, const std::string& image,
                const std::string& out_path, double alpha) {
    const auto [vit, params] = load_params(checkpoint);
    const ImageU8 pre = clahe(load_image(image), cfg.clahe);
    const ImageU8 view = model_view(pre, vit);

    const auto [logits, trace] =
        forward<float>(vit, params, single_batch(view, vit), Mode::eval, true);
    RolloutMap map = attention_rollout(trace);
    map.source = fs::path(image).filename().string();

    int predicted = 0;
    const Tensor<double> probs = softmax(logits.cast<double>(), 1);
    for (std::size_t k = 1; k < kNumClasses; ++k)
        if (probs[k] > probs[static_cast<std::size_t>(predicted)])
            predicted = static_cast<int>(k);

    const fs::path out = out_path;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_png(out, render_rollout(view, map, alpha));
    fs::path csv = out;
    csv.replace_extension(".csv");
    write_rollout_csv(map, csv);

    std::printf("prediction: %s\n", kClassNames[static_cast<std::size_t>(predicted)]);
    std::printf("wrote %s and %s\n", out.string().c_str(), csv.string().c_str());
    return 0;
}

std::string config_footer() {
    std::string text = "Config keys (file and --set):\n";
    for (const auto& [key, desc] : config_keys()) {
        text += "  ";
        text += key;
        text.append(key.size() < 24 ? 24 - key.size() : 1, ' ');
        text += desc;
        text += '\n';
    }
    return text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "vitmri: deterministic ViT pipeline for brain-MRI tumor classification\n"
        "(CLAHE preprocessing, stratified split, two-stage fine-tuning with EMA,\n"
        "TTA evaluation, Attention Rollout heatmaps)"};
    app.require_subcommand(1);
    app.footer(config_footer());

    CommonOpts common;
    int rc = 0;

    // split
    auto* split_cmd =
        app.add_subcommand("split", "Scan a class-folder dataset and write a stratified "
                                    "train/val/test manifest CSV (default 0.8/0.1/0.1)");
    std::string split_data_root, split_out;
    std::uint64_t split_seed = 0;
    add_common(split_cmd, common);
    auto* split_root_opt = split_cmd->add_option(
        "--data-root", split_data_root,
        "root with glioma/ healthy/ meningioma/ pituitary/ subdirectories");
    auto* split_seed_opt =
        split_cmd->add_option("--seed", split_seed, "split shuffle seed (default 42)");
    split_cmd->add_option("--out", split_out, "manifest CSV path (default manifest.csv)");
    split_cmd->callback([&] {
        RunConfig cfg = resolve_config(common);
        if (split_root_opt->count()) cfg.data_root = split_data_root;
        if (split_seed_opt->count()) cfg.seed = split_seed;
        rc = cmd_split(cfg, split_out);
    });

    // preprocess
    auto* pre_cmd = app.add_subcommand(
        "preprocess", "Apply CLAHE (8x8 tiles, clip 2.0 by default) to every manifest image "
                      "and cache the results as PNGs");
    std::string pre_manifest, pre_src, pre_cache;
    std::size_t pre_threads = 0;
    add_common(pre_cmd, common);
    auto* pre_manifest_opt =
        pre_cmd->add_option("--manifest", pre_manifest, "split CSV from `vitmri split`");
    auto* pre_src_opt = pre_cmd->add_option("--src", pre_src, "raw dataset root");
    auto* pre_cache_opt = pre_cmd->add_option("--cache", pre_cache, "cache directory to fill");
    pre_cmd->add_option("--threads", pre_threads, "worker threads (default: all cores)");
    pre_cmd->callback([&] {
        RunConfig cfg = resolve_config(common);
        if (pre_manifest_opt->count()) cfg.manifest = pre_manifest;
        if (pre_src_opt->count()) cfg.data_root = pre_src;
        if (pre_cache_opt->count()) cfg.cache_root = pre_cache;
        rc = cmd_preprocess(cfg, pre_threads);
    });

    // train
    auto* train_cmd = app.add_subcommand(
        "train", "Two-stage fine-tuning: 5 head-only epochs at lr 1e-3, then full fine-tuning "
                 "(backbone 1e-5, head 1e-4, cosine to 1e-7) with MixUp/CutMix, EMA 0.999 and "
                 "early stopping (patience 5); seed 42 by default");
    std::string train_manifest, train_out_dir;
    add_common(train_cmd, common);
    auto* train_manifest_opt =
        train_cmd->add_option("--manifest", train_manifest, "split CSV from `vitmri split`");
    auto* train_out_opt =
        train_cmd->add_option("--out-dir", train_out_dir, "output directory (default `out`)");
    train_cmd->callback([&] {
        RunConfig cfg = resolve_config(common);
        if (train_manifest_opt->count()) cfg.manifest = train_manifest;
        if (train_out_opt->count()) cfg.output_dir = train_out_dir;
        rc = cmd_train(cfg);
    });

    // eval
    auto* eval_cmd = app.add_subcommand(
        "eval", "Evaluate a checkpoint on one split; writes a per-class "
                "precision/recall/F1 report and confusion matrices");
    std::string eval_checkpoint, eval_manifest, eval_split = "test", eval_out_dir;
    bool eval_tta = false;
    add_common(eval_cmd, common);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    auto* eval_manifest_opt =
        eval_cmd->add_option("--manifest", eval_manifest, "split CSV from `vitmri split`");
    eval_cmd->add_option("--split", eval_split, "train|val|test (default test)");
    auto* eval_out_opt =
        eval_cmd->add_option("--out-dir", eval_out_dir, "output directory (default `out`)");
    eval_cmd->add_flag("--tta", eval_tta,
                       "average softmax over the 5 deterministic views "
                       "(original, hflip, rot90cw, rot90ccw, contrast 1.10)");
    eval_cmd->callback([&] {
        RunConfig cfg = resolve_config(common);
        if (eval_manifest_opt->count()) cfg.manifest = eval_manifest;
        if (eval_out_opt->count()) cfg.output_dir = eval_out_dir;
        rc = cmd_eval(cfg, eval_checkpoint, eval_split, eval_tta);
    });

    // predict
    auto* predict_cmd = app.add_subcommand(
        "predict", "Classify one image (CLAHE is applied in-process first)");
    std::string predict_checkpoint, predict_image;
    bool predict_tta = false;
    add_common(predict_cmd, common);
    predict_cmd->add_option("--checkpoint", predict_checkpoint, "checkpoint file")->required();
    predict_cmd->add_option("--image", predict_image, "PNG or JPEG image")->required();
    predict_cmd->add_flag("--tta", predict_tta, "average softmax over the 5 deterministic views");
    predict_cmd->callback([&] {
        const RunConfig cfg = resolve_config(common);
        rc = cmd_predict(cfg, predict_checkpoint, predict_image, predict_tta);
    });

    // rollout
    auto* rollout_cmd = app.add_subcommand(
        "rollout", "Render an Attention Rollout heatmap overlay (jet colormap, 45% opacity) "
                   "plus the raw grid as CSV");
    std::string rollout_checkpoint, rollout_image, rollout_out;
    double rollout_alpha = 0.45;
    add_common(rollout_cmd, common);
    rollout_cmd->add_option("--checkpoint", rollout_checkpoint, "checkpoint file")->required();
    rollout_cmd->add_option("--image", rollout_image, "PNG or JPEG image")->required();
    rollout_cmd->add_option("--out", rollout_out, "overlay PNG path")->required();
    rollout_cmd->add_option("--alpha", rollout_alpha, "overlay opacity (default 0.45)");
    rollout_cmd->callback([&] {
        const RunConfig cfg = resolve_config(common);
        rc = cmd_rollout(cfg, rollout_checkpoint, rollout_image, rollout_out, rollout_alpha);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ImageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return rc;
}
