#include "vitmri/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace vitmri {

void StageConfig::validate() const {
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw std::invalid_argument("StageConfig: label_smoothing must lie in [0,1)");
    if (!(lr_min > 0.0))
        throw std::invalid_argument("StageConfig: lr_min must be positive");
    if (!(stage1_head_lr > 0.0))
        throw std::invalid_argument("StageConfig: stage1 head lr must be positive");
    if (stage2_max_epochs > 0 &&
        (stage2_backbone_lr <= lr_min || stage2_head_lr <= lr_min))
        throw std::invalid_argument("StageConfig: stage-2 lrs must exceed lr_min");
    if (patience < 1) throw std::invalid_argument("StageConfig: patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("StageConfig: batch_size must be >= 1");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("StageConfig: betas must lie in (0,1)");
    if (ema_decay < 0.0 || ema_decay >= 1.0)
        throw std::invalid_argument("StageConfig: ema_decay must lie in [0,1)");
    if (weight_decay < 0.0)
        throw std::invalid_argument("StageConfig: weight_decay must be non-negative");
}

Tensor<double> smooth_targets(const Tensor<double>& soft_targets, double eps) {
    const std::size_t k = soft_targets.dim(soft_targets.rank() - 1);
    Tensor<double> out = soft_targets;
    const double bonus = eps / static_cast<double>(k);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (1.0 - eps) * out[i] + bonus;
    return out;
}

double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
    if (total < 1) throw std::invalid_argument("cosine_lr: total steps must be >= 1");
    if (t > total) throw std::invalid_argument("cosine_lr: step index out of range");
    if (t == 0) return lr_max;
    if (t == total) return lr_min;
    constexpr double pi = 3.14159265358979323846;
    const double frac = static_cast<double>(t) / static_cast<double>(total);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(pi * frac));
}

namespace {

int argmax_row(const float* row, std::size_t k) {
    int best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = static_cast<int>(j);
    return best;
}

int argmax_row(const double* row, std::size_t k) {
    int best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = static_cast<int>(j);
    return best;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out << "stage,epoch,train_loss,train_acc,val_loss,val_acc,lr_backbone,lr_head\n";
    for (const auto& e : report.epochs)
        out << e.stage << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
            << format_double(e.train_acc) << ',' << format_double(e.val_loss) << ','
            << format_double(e.val_acc) << ',' << format_double(e.lr_backbone) << ','
            << format_double(e.lr_head) << '\n';
    if (!out.good()) throw std::runtime_error("write failed for " + path.string());
}

void write_report_summary(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    std::size_t s1 = 0, s2 = 0;
    for (const auto& e : report.epochs) (e.stage == 1 ? s1 : s2) += 1;
    out << "epochs: " << report.epochs.size() << " (stage1 " << s1 << ", stage2 " << s2 << ")\n";
    if (!report.epochs.empty()) {
        const auto& best = report.epochs[report.best_index];
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", report.best_val_acc);
        out << "best: stage " << best.stage << " epoch " << best.epoch << " val_acc " << buf
            << "\n";
    }
    out << "stopping: " << report.stopping_reason << "\n";
    if (!out.good()) throw std::runtime_error("write failed for " + path.string());
}

EvalResult evaluate(const ViTConfig& cfg, const ParamSet<float>& params,
                    const std::filesystem::path& root,
                    const std::vector<ManifestEntry>& entries, std::size_t batch_size,
                    double label_smoothing) {
    EvalResult res;
    res.truth.assign(entries.size(), -1);
    res.prediction.assign(entries.size(), -1);
    if (entries.empty()) return res;

    BatchStream stream(root, entries, batch_size, /*shuffle_seed=*/0, /*epoch=*/0,
                       cfg.image_size, cfg.channels);
    Batch batch;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    while (stream.next(batch)) {
        const std::size_t b = batch.images.dim(0);
        const auto [logits, trace] =
            forward<float>(cfg, params, batch.images, Mode::eval, false);
        (void)trace;
        loss_sum +=
            soft_ce_loss_value(logits, smooth_targets(batch.labels, label_smoothing)) *
            static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
            const int pred = argmax_row(logits.data() + i * cfg.num_classes, cfg.num_classes);
            const int truth =
                argmax_row(batch.labels.data() + i * kNumClasses, kNumClasses);
            res.prediction[batch.indices[i]] = pred;
            res.truth[batch.indices[i]] = truth;
            if (pred == truth) ++correct;
        }
    }
    res.loss = loss_sum / static_cast<double>(entries.size());
    res.accuracy = static_cast<double>(correct) / static_cast<double>(entries.size());
    return res;
}

namespace {

struct EpochOutcome {
    double train_loss = 0.0;
};

// One training epoch: deterministic batch order, optional pixel augmentation
// and MixUp/CutMix, AdamW step, EMA update after every step.
EpochOutcome run_train_epoch(const ViTConfig& cfg, ParamSet<float>& params,
                             AdamWState<float>& opt, EmaState<float>& ema,
                             const std::filesystem::path& root,
                             const std::vector<ManifestEntry>& train_entries,
                             const StageConfig& sc, const AugmentConfig& aug, int stage,
                             std::size_t epoch_in_stage, std::size_t global_epoch,
                             double lr_backbone, double lr_head, std::uint64_t seed) {
    RngStream aug_rng = RngStream::derive(seed, "augment", global_epoch);
    RngStream mix_rng = RngStream::derive(seed, "mix", global_epoch);
    RngStream drop_rng = RngStream::derive(seed, "dropout", global_epoch);

    BatchStream::AugmentHook hook;
    if (sc.augment_pixels)
        hook = [&aug, &aug_rng](const ImageU8& img, std::size_t) {
            return pixel_augment(img, aug, aug_rng);
        };
    BatchStream stream(root, train_entries, sc.batch_size, seed, global_epoch, cfg.image_size,
                       cfg.channels, hook);

    const AdamWHyper hp{sc.beta1, sc.beta2, sc.adam_eps};
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    Batch batch;
    while (stream.next(batch)) {
        try {
            MixedBatch mixed;
            if (sc.mix_batches) {
                const MixStrategy strat = sample_strategy(aug, mix_rng);
                mixed = strat == MixStrategy::mixup ? mixup(batch, aug.mixup_alpha, mix_rng)
                                                    : cutmix(batch, aug.cutmix_alpha, mix_rng);
            } else {
                mixed.images = batch.images;
                mixed.soft_labels = batch.labels;
            }
            const Tensor<float> smoothed =
                smooth_targets(mixed.soft_labels, sc.label_smoothing).cast<float>();

            Graph<float> g;
            VitGraph<float> vg =
                vit_forward(g, cfg, params, mixed.images, Mode::train, false, &drop_rng);
            const auto loss_id = soft_ce_loss(g, vg.logits, smoothed);
            const double loss = g.value(loss_id).item();
            if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss");
            g.backward(loss_id);

            std::vector<Tensor<float>> grads;
            grads.reserve(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                const auto node = vg.param_nodes[i];
                grads.push_back(g.has_grad(node) ? g.grad(node)
                                                 : Tensor<float>(params.values[i].shape()));
            }
            adamw_step(params, grads, opt, lr_backbone, lr_head, sc.weight_decay, hp,
                       /*update_backbone=*/stage == 2);
            ema.update(params);

            const std::size_t b = batch.images.dim(0);
            loss_sum += loss * static_cast<double>(b);
            seen += b;
        } catch (const std::exception& e) {
            char ctx[160];
            std::snprintf(ctx, sizeof(ctx),
                          "training aborted: stage %d epoch %zu batch %zu "
                          "(lr_backbone=%g, lr_head=%g): ",
                          stage, epoch_in_stage, batch_index, lr_backbone, lr_head);
            throw std::runtime_error(ctx + std::string(e.what()));
        }
        ++batch_index;
    }
    EpochOutcome out;
    out.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    return out;
}

}  // namespace

TrainResult train_two_stage(const ViTConfig& cfg, ParamSet<float> params,
                            const std::filesystem::path& root,
                            const std::vector<ManifestEntry>& train_entries,
                            const std::vector<ManifestEntry>& val_entries,
                            const StageConfig& stage_cfg, const AugmentConfig& aug_cfg,
                            std::uint64_t seed, const EpochCallback& on_epoch) {
    cfg.validate();
    stage_cfg.validate();
    const bool any_epochs = stage_cfg.stage1_epochs + stage_cfg.stage2_max_epochs > 0;
    if (any_epochs && train_entries.empty()) throw UserError("training split is empty");
    if (any_epochs && val_entries.empty()) throw UserError("validation split is empty");

    EmaState<float> ema = EmaState<float>::init(params, stage_cfg.ema_decay);
    TrainReport report;
    ParamSet<float> best_ema = ema.as_params(params);
    double best_val = -1.0;
    std::size_t global_epoch = 0;

    const auto record_epoch = [&](int stage, std::size_t epoch, double lr_b, double lr_h,
                                  const EpochOutcome& outcome) {
        EpochRecord rec;
        rec.stage = stage;
        rec.epoch = epoch;
        rec.lr_backbone = lr_b;
        rec.lr_head = lr_h;
        rec.train_loss = outcome.train_loss;
        rec.train_acc = evaluate(cfg, params, root, train_entries, stage_cfg.batch_size,
                                 stage_cfg.label_smoothing)
                            .accuracy;
        ema.swap_into(params);
        const EvalResult va = evaluate(cfg, params, root, val_entries, stage_cfg.batch_size,
                                       stage_cfg.label_smoothing);
        ema.swap_into(params);
        rec.val_loss = va.loss;
        rec.val_acc = va.accuracy;
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.val_acc > best_val) {
            best_val = rec.val_acc;
            report.best_index = report.epochs.size() - 1;
            report.best_val_acc = rec.val_acc;
            best_ema = ema.as_params(params);
            return true;
        }
        return false;
    };

    // Stage 1: head only, constant lr.
    {
        AdamWState<float> opt = AdamWState<float>::init(params);
        for (std::size_t e = 1; e <= stage_cfg.stage1_epochs; ++e) {
            const EpochOutcome out =
                run_train_epoch(cfg, params, opt, ema, root, train_entries, stage_cfg, aug_cfg,
                                1, e, global_epoch, 0.0, stage_cfg.stage1_head_lr, seed);
            record_epoch(1, e, 0.0, stage_cfg.stage1_head_lr, out);
            ++global_epoch;
        }
    }

    // Stage 2: full fine-tune with fresh optimizer state and cosine schedule.
    bool stopped_early = false;
    std::size_t stage2_done = 0;
    {
        AdamWState<float> opt = AdamWState<float>::init(params);
        std::size_t since_improve = 0;
        for (std::size_t e = 1; e <= stage_cfg.stage2_max_epochs; ++e) {
            const double lr_b = cosine_lr(e - 1, stage_cfg.stage2_max_epochs,
                                          stage_cfg.stage2_backbone_lr, stage_cfg.lr_min);
            const double lr_h = cosine_lr(e - 1, stage_cfg.stage2_max_epochs,
                                          stage_cfg.stage2_head_lr, stage_cfg.lr_min);
            const EpochOutcome out =
                run_train_epoch(cfg, params, opt, ema, root, train_entries, stage_cfg, aug_cfg,
                                2, e, global_epoch, lr_b, lr_h, seed);
            const bool improved = record_epoch(2, e, lr_b, lr_h, out);
            ++global_epoch;
            stage2_done = e;
            if (improved)
                since_improve = 0;
            else
                ++since_improve;
            if (stage_cfg.early_stopping && since_improve >= stage_cfg.patience) {
                stopped_early = true;
                break;
            }
        }
    }

    if (report.epochs.empty())
        report.stopping_reason = "no epochs configured";
    else if (stopped_early)
        report.stopping_reason = "early stopping after stage-2 epoch " +
                                 std::to_string(stage2_done) + " (patience " +
                                 std::to_string(stage_cfg.patience) + ")";
    else if (stage_cfg.stage2_max_epochs > 0)
        report.stopping_reason = "reached stage-2 max_epochs";
    else
        report.stopping_reason = "stage 1 only";

    TrainResult result;
    result.ema = ema.as_params(params);
    result.best_ema = std::move(best_ema);
    result.raw = std::move(params);
    result.report = std::move(report);
    return result;
}

}  // namespace vitmri
