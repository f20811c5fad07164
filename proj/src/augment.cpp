#include "vitmri/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vitmri {

ImageU8 pixel_augment(const ImageU8& img, const AugmentConfig& cfg, RngStream& rng,
                      PixelAugParams* logged) {
    PixelAugParams p;
    const double u_flip = rng.uniform();
    p.flipped = u_flip < cfg.hflip_prob;
    p.degrees = rng.uniform(-cfg.rot_degrees, cfg.rot_degrees);
    p.dx_frac = rng.uniform(-cfg.translate_frac, cfg.translate_frac);
    p.dy_frac = rng.uniform(-cfg.translate_frac, cfg.translate_frac);
    p.zoom = rng.uniform(1.0 - cfg.zoom_frac, 1.0 + cfg.zoom_frac);
    p.contrast = rng.uniform(1.0 - cfg.contrast_frac, 1.0 + cfg.contrast_frac);
    if (logged) *logged = p;

    ImageU8 out = p.flipped ? hflip(img) : img;
    out = rotate_small(out, p.degrees);
    out = translate(out, p.dx_frac, p.dy_frac);
    out = zoom(out, p.zoom);
    out = adjust_contrast(out, p.contrast);
    return out;
}

MixStrategy sample_strategy(const AugmentConfig& cfg, RngStream& rng) {
    const double total = cfg.mixup_prob + cfg.cutmix_prob;
    if (!(total > 0.0)) throw std::invalid_argument("sample_strategy: zero strategy weights");
    return rng.uniform() < cfg.mixup_prob / total ? MixStrategy::mixup : MixStrategy::cutmix;
}

namespace {

std::size_t batch_size_of(const Batch& b) { return b.images.dim(0); }

MixedBatch passthrough(const Batch& batch) {
    MixedBatch out;
    out.images = batch.images;
    out.soft_labels = batch.labels;
    out.lambda_used = 1.0;
    out.strategy = MixStrategy::none;
    return out;
}

void check_partner(const Batch& batch, const std::vector<std::size_t>& partner) {
    if (partner.size() != batch_size_of(batch))
        throw std::invalid_argument("mix: partner permutation size mismatch");
}

}  // namespace

MixedBatch apply_mixup(const Batch& batch, double lambda,
                       const std::vector<std::size_t>& partner) {
    check_partner(batch, partner);
    const std::size_t b = batch_size_of(batch);
    const std::size_t sample = batch.images.numel() / b;

    MixedBatch out;
    out.strategy = MixStrategy::mixup;
    out.lambda_used = lambda;
    out.images = Tensor<float>(batch.images.shape());
    out.soft_labels = Tensor<double>(batch.labels.shape());
    for (std::size_t i = 0; i < b; ++i) {
        const float* xi = batch.images.data() + i * sample;
        const float* xj = batch.images.data() + partner[i] * sample;
        float* dst = out.images.data() + i * sample;
        for (std::size_t k = 0; k < sample; ++k)
            dst[k] = static_cast<float>(lambda * static_cast<double>(xi[k]) +
                                        (1.0 - lambda) * static_cast<double>(xj[k]));
        const double* yi = batch.labels.data() + i * kNumClasses;
        const double* yj = batch.labels.data() + partner[i] * kNumClasses;
        double* ydst = out.soft_labels.data() + i * kNumClasses;
        for (std::size_t k = 0; k < kNumClasses; ++k)
            ydst[k] = lambda * yi[k] + (1.0 - lambda) * yj[k];
    }
    return out;
}

MixedBatch mixup(const Batch& batch, double alpha, RngStream& rng) {
    if (!(alpha > 0.0)) throw std::invalid_argument("mixup: alpha must be positive");
    if (batch_size_of(batch) < 2) return passthrough(batch);
    const double lambda = rng.beta(alpha, alpha);
    const std::vector<std::size_t> partner = rng.permutation(batch_size_of(batch));
    return apply_mixup(batch, lambda, partner);
}

MixedBatch apply_cutmix(const Batch& batch, double lambda, double center_x, double center_y,
                        const std::vector<std::size_t>& partner) {
    check_partner(batch, partner);
    const std::size_t b = batch.images.dim(0);
    const std::size_t c = batch.images.dim(1);
    const std::size_t h = batch.images.dim(2);
    const std::size_t w = batch.images.dim(3);

    const double cut = std::sqrt(1.0 - lambda);
    const double cut_w = static_cast<double>(w) * cut;
    const double cut_h = static_cast<double>(h) * cut;
    const auto clampi = [](double v, std::size_t hi) {
        return static_cast<std::size_t>(
            std::clamp(std::floor(v), 0.0, static_cast<double>(hi)));
    };
    const std::size_t x1 = clampi(center_x - cut_w / 2.0, w);
    const std::size_t x2 = clampi(center_x + cut_w / 2.0, w);
    const std::size_t y1 = clampi(center_y - cut_h / 2.0, h);
    const std::size_t y2 = clampi(center_y + cut_h / 2.0, h);

    const std::size_t area = (x2 - x1) * (y2 - y1);
    const double lambda_adj =
        1.0 - static_cast<double>(area) / static_cast<double>(w * h);

    MixedBatch out;
    out.strategy = MixStrategy::cutmix;
    out.lambda_used = lambda_adj;
    out.images = batch.images;
    out.soft_labels = Tensor<double>(batch.labels.shape());
    const std::size_t sample = c * h * w;
    for (std::size_t i = 0; i < b; ++i) {
        float* dst = out.images.data() + i * sample;
        const float* src = batch.images.data() + partner[i] * sample;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = y1; y < y2; ++y) {
                const std::size_t off = ch * h * w + y * w;
                std::copy(src + off + x1, src + off + x2, dst + off + x1);
            }
        const double* yi = batch.labels.data() + i * kNumClasses;
        const double* yj = batch.labels.data() + partner[i] * kNumClasses;
        double* ydst = out.soft_labels.data() + i * kNumClasses;
        for (std::size_t k = 0; k < kNumClasses; ++k)
            ydst[k] = lambda_adj * yi[k] + (1.0 - lambda_adj) * yj[k];
    }
    return out;
}

MixedBatch cutmix(const Batch& batch, double alpha, RngStream& rng) {
    if (!(alpha > 0.0)) throw std::invalid_argument("cutmix: alpha must be positive");
    if (batch_size_of(batch) < 2) return passthrough(batch);
    const std::size_t h = batch.images.dim(2);
    const std::size_t w = batch.images.dim(3);
    const double lambda = rng.beta(alpha, alpha);
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const std::vector<std::size_t> partner = rng.permutation(batch.images.dim(0));
    return apply_cutmix(batch, lambda, cx, cy, partner);
}

}  // namespace vitmri
