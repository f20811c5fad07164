#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vitmri/augment.hpp"
#include "vitmri/dataset.hpp"
#include "vitmri/graph.hpp"
#include "vitmri/vit.hpp"

namespace vitmri {

struct StageConfig {
    // Stage 1: head warm-up, backbone frozen, constant lr.
    std::size_t stage1_epochs = 5;
    double stage1_head_lr = 1e-3;
    // Stage 2: full fine-tune, per-epoch cosine schedule toward lr_min.
    std::size_t stage2_max_epochs = 15;
    double stage2_backbone_lr = 1e-5;
    double stage2_head_lr = 1e-4;
    double lr_min = 1e-7;
    std::size_t patience = 5;

    double weight_decay = 1e-4;
    double label_smoothing = 0.1;
    std::size_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double ema_decay = 0.999;

    bool early_stopping = true;  // stage-2 patience; disabled for overfit smoke runs
    bool augment_pixels = true;  // per-image geometric/contrast augmentation (train only)
    bool mix_batches = true;     // per-batch MixUp/CutMix (train only)

    void validate() const;
};

// targets' = (1 - eps) * soft_targets + eps / K.
Tensor<double> smooth_targets(const Tensor<double>& soft_targets, double eps);

// Graph node for mean over the batch of -sum_k targets'_k * log softmax(logits)_k.
// `smoothed` must already be smoothed; the node is built from primitives so
// it participates in backward().
template <typename T>
typename Graph<T>::Id soft_ce_loss(Graph<T>& g, typename Graph<T>::Id logits,
                                   const Tensor<T>& smoothed) {
    const std::size_t k = smoothed.dim(smoothed.rank() - 1);
    auto prod = g.mul(g.constant(smoothed), g.log_softmax(logits, 1));
    return g.scale(g.reduce_mean(prod), static_cast<T>(-static_cast<double>(k)));
}

// Same loss evaluated directly in double (no graph), for validation passes.
template <typename T>
double soft_ce_loss_value(const Tensor<T>& logits, const Tensor<double>& smoothed) {
    const Tensor<double> logp = log_softmax(logits.template cast<double>(), 1);
    double total = 0.0;
    for (std::size_t i = 0; i < logp.numel(); ++i) total += smoothed[i] * logp[i];
    return -total / static_cast<double>(logits.dim(0));
}

struct AdamWHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Decoupled weight decay: theta -= lr*m_hat/(sqrt(v_hat)+eps) + lr*wd*theta,
// with the decay term computed from the pre-update theta.
template <typename T>
struct AdamWState {
    std::vector<Tensor<T>> m, v;
    std::uint64_t t = 0;

    static AdamWState init(const ParamSet<T>& params) {
        AdamWState st;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const auto& p : params.values) {
            st.m.emplace_back(p.shape());
            st.v.emplace_back(p.shape());
        }
        return st;
    }
};

template <typename T>
void adamw_update_tensor(Tensor<T>& theta, const Tensor<T>& grad, Tensor<T>& m, Tensor<T>& v,
                         double bc1, double bc2, double lr, double weight_decay,
                         const AdamWHyper& hp) {
    for (std::size_t i = 0; i < theta.numel(); ++i) {
        const T g = grad[i];
        m[i] = static_cast<T>(hp.beta1 * m[i] + (1.0 - hp.beta1) * g);
        v[i] = static_cast<T>(hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g);
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        const double step = lr * m_hat / (std::sqrt(v_hat) + hp.eps) +
                            lr * weight_decay * theta[i];
        theta[i] = static_cast<T>(theta[i] - step);
    }
}

// One optimizer step over the whole parameter set. Backbone entries use
// lr_backbone; head entries lr_head. With update_backbone false the backbone
// is skipped entirely (values and moments untouched). The step counter
// advances once per call.
template <typename T>
void adamw_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, AdamWState<T>& st,
                double lr_backbone, double lr_head, double weight_decay, const AdamWHyper& hp,
                bool update_backbone = true) {
    if (grads.size() != params.size() || st.m.size() != params.size())
        throw std::invalid_argument("adamw_step: size mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const bool is_backbone = params.backbone[i] != 0;
        if (is_backbone && !update_backbone) continue;
        adamw_update_tensor(params.values[i], grads[i], st.m[i], st.v[i], bc1, bc2,
                            is_backbone ? lr_backbone : lr_head, weight_decay, hp);
    }
}

// Cosine annealing, stepped once per epoch: lr(t) on 0..T with exact
// endpoints lr_max at t=0 and lr_min at t=T.
double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min = 1e-7);

// Shadow weights: shadow <- decay*shadow + (1-decay)*theta after each step.
template <typename T>
struct EmaState {
    std::vector<Tensor<T>> shadow;
    double decay = 0.999;

    static EmaState init(const ParamSet<T>& params, double decay) {
        EmaState e;
        e.decay = decay;
        e.shadow = params.values;  // exact copy at stage start
        return e;
    }

    void update(const ParamSet<T>& params) {
        const T d = static_cast<T>(decay);
        const T one_minus = static_cast<T>(1.0 - decay);
        for (std::size_t i = 0; i < shadow.size(); ++i) {
            Tensor<T>& s = shadow[i];
            const Tensor<T>& p = params.values[i];
            for (std::size_t j = 0; j < s.numel(); ++j) s[j] = d * s[j] + one_minus * p[j];
        }
    }

    // Bitwise exchange: call once to evaluate with EMA weights, again to
    // restore the training weights exactly.
    void swap_into(ParamSet<T>& params) {
        for (std::size_t i = 0; i < shadow.size(); ++i)
            std::swap(shadow[i].storage(), params.values[i].storage());
    }

    ParamSet<T> as_params(const ParamSet<T>& like) const {
        ParamSet<T> out;
        out.names = like.names;
        out.backbone = like.backbone;
        out.values = shadow;
        return out;
    }
};

struct EpochRecord {
    int stage = 0;            // 1 or 2
    std::size_t epoch = 0;    // 1-based within its stage
    double train_loss = 0.0;  // mean mixed-batch loss over the epoch
    double train_acc = 0.0;   // clean eval-mode pass over the training set
    double val_loss = 0.0;    // EMA weights, eval mode
    double val_acc = 0.0;
    double lr_backbone = 0.0;
    double lr_head = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_index = 0;  // into epochs, highest val_acc (first on ties)
    double best_val_acc = 0.0;
    std::string stopping_reason;
};

void write_report_csv(const TrainReport& report, const std::filesystem::path& path);
void write_report_summary(const TrainReport& report, const std::filesystem::path& path);

struct TrainResult {
    ParamSet<float> raw;       // final training weights
    ParamSet<float> ema;       // final EMA weights
    ParamSet<float> best_ema;  // EMA weights at the best validation epoch
    TrainReport report;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> truth;       // per entry, in entry order
    std::vector<int> prediction;  // argmax, lowest index on ties
};

// Eval-mode pass (no augmentation, no dropout) over `entries` under `root`.
EvalResult evaluate(const ViTConfig& cfg, const ParamSet<float>& params,
                    const std::filesystem::path& root, const std::vector<ManifestEntry>& entries,
                    std::size_t batch_size, double label_smoothing);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Two-stage fine-tuning. Stage 1 trains the head only (backbone updates
// suppressed) for stage1_epochs at a constant lr; stage 2 trains everything
// with a per-epoch cosine schedule and strict-improvement early stopping
// counted over stage-2 epochs only. EMA starts as a copy of the initial
// weights, updates after every optimizer step, and is what validation (and
// the returned ema/best_ema sets) use. `on_epoch` fires after each recorded
// epoch, for progress reporting.
TrainResult train_two_stage(const ViTConfig& cfg, ParamSet<float> params,
                            const std::filesystem::path& root,
                            const std::vector<ManifestEntry>& train_entries,
                            const std::vector<ManifestEntry>& val_entries,
                            const StageConfig& stage_cfg, const AugmentConfig& aug_cfg,
                            std::uint64_t seed, const EpochCallback& on_epoch = nullptr);

}  // namespace vitmri
