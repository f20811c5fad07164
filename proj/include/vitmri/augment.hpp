#pragma once

#include <vector>

#include "vitmri/dataset.hpp"
#include "vitmri/rng.hpp"
#include "vitmri/transforms.hpp"

namespace vitmri {

struct AugmentConfig {
    double hflip_prob = 0.5;
    double rot_degrees = 15.0;
    double translate_frac = 0.05;
    double zoom_frac = 0.08;
    double contrast_frac = 0.10;
    double mixup_alpha = 0.2;
    double cutmix_alpha = 1.0;
    double mixup_prob = 0.5;   // strategy selection weights
    double cutmix_prob = 0.5;
};

// Parameters drawn for one pixel_augment call, exposed so a run can be
// replayed op-by-op.
struct PixelAugParams {
    bool flipped = false;
    double degrees = 0.0;
    double dx_frac = 0.0;
    double dy_frac = 0.0;
    double zoom = 1.0;
    double contrast = 1.0;
};

// Applies, in fixed order: horizontal flip (hflip_prob), rotation
// U(-rot, rot), translation U(-t, t) per axis, zoom U(1-z, 1+z), contrast
// U(1-c, 1+c). All parameters are drawn even when a step is skipped, so the
// stream position does not depend on the draws. Vertical flips never occur.
ImageU8 pixel_augment(const ImageU8& img, const AugmentConfig& cfg, RngStream& rng,
                      PixelAugParams* logged = nullptr);

enum class MixStrategy { mixup, cutmix, none };

struct MixedBatch {
    Tensor<float> images;        // [B,C,H,W]
    Tensor<double> soft_labels;  // [B,K], rows sum to 1
    double lambda_used = 1.0;
    MixStrategy strategy = MixStrategy::none;
};

MixStrategy sample_strategy(const AugmentConfig& cfg, RngStream& rng);

// lambda ~ Beta(alpha, alpha); partner = one shuffled permutation of the
// batch; images and labels mixed convexly. B < 2 passes through unchanged.
MixedBatch mixup(const Batch& batch, double alpha, RngStream& rng);
MixedBatch apply_mixup(const Batch& batch, double lambda, const std::vector<std::size_t>& partner);

// lambda ~ Beta(alpha, alpha); a box of size (W*sqrt(1-lambda), H*sqrt(1-lambda))
// centered uniformly over the image is pasted from the partner, clipped to
// bounds; labels mix with lambda_adj = 1 - pasted_area/(W*H).
MixedBatch cutmix(const Batch& batch, double alpha, RngStream& rng);
MixedBatch apply_cutmix(const Batch& batch, double lambda, double center_x, double center_y,
                        const std::vector<std::size_t>& partner);

}  // namespace vitmri
