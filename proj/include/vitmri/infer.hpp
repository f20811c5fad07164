#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "vitmri/dataset.hpp"
#include "vitmri/transforms.hpp"
#include "vitmri/vit.hpp"

namespace vitmri {

inline constexpr std::size_t kTtaViewCount = 5;
inline constexpr std::array<const char*, kTtaViewCount> kTtaViewTags = {
    "original", "hflip", "rot90cw", "rot90ccw", "contrast"};

// The five deterministic views, in tag order. The contrast view uses
// adjust_contrast(img, 1.10). Requires a square image (the rotations must
// preserve shape).
std::array<ImageU8, kTtaViewCount> tta_views(const ImageU8& img);

struct TtaResult {
    std::array<std::vector<double>, kTtaViewCount> per_view;  // softmax per view
    std::vector<double> averaged;                             // arithmetic mean
    int predicted = 0;                                        // lowest index wins ties
};

TtaResult tta_predict(const ViTConfig& cfg, const ParamSet<float>& params, const ImageU8& img);

struct RolloutMap {
    Heatmap grid;                  // sqrt(N) x sqrt(N), min-max normalized to [0,1]
    std::vector<double> cls_row;   // CLS row of the rollout matrix, pre-normalization
    std::vector<Tensor<double>> per_layer;  // A_aug per layer when retained
    std::string source;            // image id, set by callers that have one
};

// Attention Rollout: per layer average the heads, add the identity, row-
// normalize; multiply with the latest layer on the left; take the CLS row,
// drop the CLS column, reshape the patch entries to a square grid in patch
// reading order and min-max normalize (a flat map becomes all zeros).
template <typename T>
RolloutMap attention_rollout(const AttentionTrace<T>& trace, std::size_t batch_index = 0,
                             bool keep_per_layer = false) {
    if (trace.layers.empty()) throw std::invalid_argument("attention_rollout: empty trace");
    const std::size_t t = trace.layers[0].dim(2);
    Tensor<double> rollout(Shape{t, t});
    for (std::size_t i = 0; i < t; ++i) rollout[i * t + i] = 1.0;

    RolloutMap out;
    for (const Tensor<T>& layer : trace.layers) {
        if (layer.rank() != 4 || layer.dim(2) != t || layer.dim(3) != t)
            throw std::invalid_argument("attention_rollout: inconsistent layer shape " +
                                        shape_str(layer.shape()));
        if (batch_index >= layer.dim(0))
            throw std::invalid_argument("attention_rollout: batch index out of range");
        const std::size_t heads = layer.dim(1);
        const T* base = layer.data() + batch_index * heads * t * t;

        // Head average, identity residual, row normalization.
        Tensor<double> aug(Shape{t, t});
        for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t j = 0; j < t; ++j) {
                double acc = 0.0;
                for (std::size_t h = 0; h < heads; ++h)
                    acc += static_cast<double>(base[h * t * t + i * t + j]);
                aug[i * t + j] = acc / static_cast<double>(heads) + (i == j ? 1.0 : 0.0);
            }
            double row_sum = 0.0;
            for (std::size_t j = 0; j < t; ++j) row_sum += aug[i * t + j];
            for (std::size_t j = 0; j < t; ++j) aug[i * t + j] /= row_sum;
        }
        rollout = matmul(aug, rollout);  // latest layer on the left
        if (keep_per_layer) out.per_layer.push_back(aug);
    }

    out.cls_row.assign(rollout.data(), rollout.data() + t);

    const std::size_t n = t - 1;
    const std::size_t side = static_cast<std::size_t>(std::llround(std::sqrt(
        static_cast<double>(n))));
    if (side * side != n)
        throw std::invalid_argument("attention_rollout: patch count is not a perfect square");

    out.grid = Heatmap(side, side);
    double mn = out.cls_row[1], mx = out.cls_row[1];
    for (std::size_t i = 1; i < t; ++i) {
        mn = std::min(mn, out.cls_row[i]);
        mx = std::max(mx, out.cls_row[i]);
    }
    if (mx > mn)
        for (std::size_t i = 0; i < n; ++i)
            out.grid.values[i] = (out.cls_row[i + 1] - mn) / (mx - mn);
    // else: degenerate flat map stays all zeros.
    return out;
}

// Upsamples the grid to the image size and overlays it with the jet ramp.
ImageU8 render_rollout(const ImageU8& img, const RolloutMap& map, double alpha = 0.45);

// Grid serialization for downstream analysis: one CSV row per grid row.
void write_rollout_csv(const RolloutMap& map, const std::filesystem::path& path);

}  // namespace vitmri
