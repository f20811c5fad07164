#include "vitmri/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vitmri/color.hpp"

namespace vitmri {

namespace {

std::uint8_t round_half_up_u8(double v) {
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

struct TileGrid {
    std::size_t count;               // tiles along this axis
    std::vector<std::size_t> lo;     // inclusive start of each tile
    std::vector<std::size_t> hi;     // exclusive end
    std::vector<double> center;      // tile center in pixel coordinates
};

TileGrid make_grid(std::size_t extent, std::size_t tiles) {
    TileGrid g;
    g.count = tiles;
    g.lo.resize(tiles);
    g.hi.resize(tiles);
    g.center.resize(tiles);
    for (std::size_t t = 0; t < tiles; ++t) {
        g.lo[t] = t * extent / tiles;
        g.hi[t] = (t + 1) * extent / tiles;
        g.center[t] = (static_cast<double>(g.lo[t] + g.hi[t]) / 2.0) - 0.5;
    }
    return g;
}

// Neighbors (t0, t1) and blend weight w for coordinate p: result is
// (1-w)*tile[t0] + w*tile[t1]. Clamped outside the span of tile centers.
void locate(const TileGrid& g, double p, std::size_t& t0, std::size_t& t1, double& w) {
    if (g.count == 1 || p <= g.center.front()) {
        t0 = t1 = 0;
        w = 0.0;
        return;
    }
    if (p >= g.center.back()) {
        t0 = t1 = g.count - 1;
        w = 0.0;
        return;
    }
    std::size_t j = 1;
    while (g.center[j] < p) ++j;
    t0 = j - 1;
    t1 = j;
    w = (p - g.center[t0]) / (g.center[t1] - g.center[t0]);
}

// Single-plane CLAHE over 8-bit values.
std::vector<std::uint8_t> clahe_plane(const std::vector<std::uint8_t>& plane, std::size_t h,
                                      std::size_t w, const ClaheConfig& cfg) {
    const std::size_t bins = cfg.bins;
    const TileGrid gx = make_grid(w, cfg.tiles_x);
    const TileGrid gy = make_grid(h, cfg.tiles_y);

    // Per-tile lookup tables mapping input value -> equalized value.
    std::vector<std::vector<double>> lut(cfg.tiles_x * cfg.tiles_y);
    std::vector<double> hist(bins);
    for (std::size_t ty = 0; ty < cfg.tiles_y; ++ty) {
        for (std::size_t tx = 0; tx < cfg.tiles_x; ++tx) {
            std::fill(hist.begin(), hist.end(), 0.0);
            for (std::size_t y = gy.lo[ty]; y < gy.hi[ty]; ++y)
                for (std::size_t x = gx.lo[tx]; x < gx.hi[tx]; ++x)
                    hist[plane[y * w + x] * bins / 256] += 1.0;

            const double n = static_cast<double>((gy.hi[ty] - gy.lo[ty]) *
                                                 (gx.hi[tx] - gx.lo[tx]));
            const double clip = cfg.clip_limit * n / static_cast<double>(bins);
            double excess = 0.0;
            for (double& b : hist)
                if (b > clip) {
                    excess += b - clip;
                    b = clip;
                }
            const double bonus = excess / static_cast<double>(bins);
            for (double& b : hist) b += bonus;

            std::vector<double> cdf(bins);
            double acc = 0.0;
            for (std::size_t b = 0; b < bins; ++b) {
                acc += hist[b];
                cdf[b] = acc;
            }
            std::vector<double>& m = lut[ty * cfg.tiles_x + tx];
            m.resize(256);
            for (std::size_t v = 0; v < 256; ++v)
                m[v] = std::floor(cdf[v * bins / 256] * 255.0 / n + 0.5);
        }
    }

    std::vector<std::uint8_t> out(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        std::size_t ty0, ty1;
        double wy;
        locate(gy, static_cast<double>(y), ty0, ty1, wy);
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t tx0, tx1;
            double wx;
            locate(gx, static_cast<double>(x), tx0, tx1, wx);
            const std::uint8_t v = plane[y * w + x];
            const double m00 = lut[ty0 * cfg.tiles_x + tx0][v];
            if (ty0 == ty1 && tx0 == tx1) {
                out[y * w + x] = round_half_up_u8(m00);
                continue;
            }
            const double m01 = lut[ty0 * cfg.tiles_x + tx1][v];
            const double m10 = lut[ty1 * cfg.tiles_x + tx0][v];
            const double m11 = lut[ty1 * cfg.tiles_x + tx1][v];
            const double top = (1.0 - wx) * m00 + wx * m01;
            const double bot = (1.0 - wx) * m10 + wx * m11;
            out[y * w + x] = round_half_up_u8((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

}  // namespace

ImageU8 clahe(const ImageU8& img, const ClaheConfig& cfg) {
    if (cfg.tiles_x == 0 || cfg.tiles_y == 0)
        throw std::invalid_argument("clahe: tile counts must be positive");
    if (!(cfg.clip_limit > 0.0))
        throw std::invalid_argument("clahe: clip_limit must be positive");
    if (cfg.bins == 0 || cfg.bins > 256)
        throw std::invalid_argument("clahe: bins must lie in [1, 256]");
    if (img.width < cfg.tiles_x || img.height < cfg.tiles_y)
        throw std::invalid_argument(
            "clahe: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
            " is smaller than the " + std::to_string(cfg.tiles_x) + "x" +
            std::to_string(cfg.tiles_y) + " tile grid");

    if (img.channels == 1) {
        ImageU8 out(img.height, img.width, 1);
        out.pixels = clahe_plane(img.pixels, img.height, img.width, cfg);
        return out;
    }

    // RGB path: equalize only L of CIE LAB, rescaled to [0,255].
    LabImage lab = to_lab(img);
    const std::size_t n = lab.height * lab.width;
    std::vector<std::uint8_t> l8(n);
    for (std::size_t i = 0; i < n; ++i) l8[i] = round_half_up_u8(lab.l[i] * 255.0 / 100.0);
    l8 = clahe_plane(l8, img.height, img.width, cfg);
    for (std::size_t i = 0; i < n; ++i) lab.l[i] = l8[i] * 100.0 / 255.0;
    return from_lab(lab);
}

}  // namespace vitmri
