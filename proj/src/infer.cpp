#include "vitmri/infer.hpp"

#include <cstdio>
#include <fstream>

namespace vitmri {

std::array<ImageU8, kTtaViewCount> tta_views(const ImageU8& img) {
    if (img.height != img.width)
        throw std::invalid_argument("tta_views: image must be square, got " +
                                    std::to_string(img.width) + "x" +
                                    std::to_string(img.height));
    return {img, hflip(img), rotate90(img, Rotate90::cw), rotate90(img, Rotate90::ccw),
            adjust_contrast(img, 1.10)};
}

TtaResult tta_predict(const ViTConfig& cfg, const ParamSet<float>& params, const ImageU8& img) {
    const auto views = tta_views(img);

    Tensor<float> batch(
        Shape{kTtaViewCount, cfg.channels, cfg.image_size, cfg.image_size});
    const std::size_t sample = cfg.channels * cfg.image_size * cfg.image_size;
    for (std::size_t v = 0; v < kTtaViewCount; ++v) {
        const Tensor<float> t = image_to_tensor(views[v], cfg.image_size, cfg.channels);
        std::copy(t.data(), t.data() + sample, batch.data() + v * sample);
    }

    const auto [logits, trace] = forward<float>(cfg, params, batch, Mode::eval, false);
    (void)trace;
    const Tensor<double> probs = softmax(logits.cast<double>(), 1);

    TtaResult res;
    res.averaged.assign(cfg.num_classes, 0.0);
    for (std::size_t v = 0; v < kTtaViewCount; ++v) {
        res.per_view[v].assign(probs.data() + v * cfg.num_classes,
                               probs.data() + (v + 1) * cfg.num_classes);
        for (std::size_t k = 0; k < cfg.num_classes; ++k)
            res.averaged[k] += res.per_view[v][k];
    }
    for (double& p : res.averaged) p /= static_cast<double>(kTtaViewCount);

    res.predicted = 0;
    for (std::size_t k = 1; k < cfg.num_classes; ++k)
        if (res.averaged[k] > res.averaged[res.predicted]) res.predicted = static_cast<int>(k);
    return res;
}

ImageU8 render_rollout(const ImageU8& img, const RolloutMap& map, double alpha) {
    const Heatmap up = resize_bilinear(map.grid, img.height, img.width);
    return overlay_heatmap(img, up, alpha);
}

void write_rollout_csv(const RolloutMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    for (std::size_t y = 0; y < map.grid.height; ++y) {
        for (std::size_t x = 0; x < map.grid.width; ++x) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.10g", map.grid.at(y, x));
            out << (x ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out.good()) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vitmri
