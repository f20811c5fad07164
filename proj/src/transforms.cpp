#include "vitmri/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vitmri {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint8_t round_half_up_u8(double v) {
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

// Bilinear sample with clamped border indices (for resizing).
double sample_clamped(const ImageU8& img, double sy, double sx, std::size_t c) {
    const auto clampi = [](long v, long hi) { return std::clamp(v, 0L, hi); };
    const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
    const long y0 = static_cast<long>(std::floor(sy));
    const long x0 = static_cast<long>(std::floor(sx));
    const double dy = sy - static_cast<double>(y0);
    const double dx = sx - static_cast<double>(x0);
    const long y0c = clampi(y0, h - 1), y1c = clampi(y0 + 1, h - 1);
    const long x0c = clampi(x0, w - 1), x1c = clampi(x0 + 1, w - 1);
    const double p00 = img.at(y0c, x0c, c), p01 = img.at(y0c, x1c, c);
    const double p10 = img.at(y1c, x0c, c), p11 = img.at(y1c, x1c, c);
    return (1.0 - dy) * ((1.0 - dx) * p00 + dx * p01) + dy * ((1.0 - dx) * p10 + dx * p11);
}

// Bilinear sample where out-of-bounds neighbors contribute black (0).
double sample_black(const ImageU8& img, double sy, double sx, std::size_t c) {
    const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
    const long y0 = static_cast<long>(std::floor(sy));
    const long x0 = static_cast<long>(std::floor(sx));
    const double dy = sy - static_cast<double>(y0);
    const double dx = sx - static_cast<double>(x0);
    double acc = 0.0;
    const double wts[4] = {(1.0 - dy) * (1.0 - dx), (1.0 - dy) * dx, dy * (1.0 - dx), dy * dx};
    const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
    for (int k = 0; k < 4; ++k) {
        if (ys[k] < 0 || ys[k] >= h || xs[k] < 0 || xs[k] >= w) continue;
        acc += wts[k] * img.at(static_cast<std::size_t>(ys[k]), static_cast<std::size_t>(xs[k]), c);
    }
    return acc;
}

}  // namespace

ImageU8 resize_bilinear(const ImageU8& img, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0)
        throw std::invalid_argument("resize_bilinear: output dimensions must be positive");
    ImageU8 out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
    const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
        for (std::size_t x = 0; x < out_w; ++x) {
            const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = round_half_up_u8(sample_clamped(img, src_y, src_x, c));
        }
    }
    return out;
}

Heatmap resize_bilinear(const Heatmap& map, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0)
        throw std::invalid_argument("resize_bilinear: output dimensions must be positive");
    Heatmap out(out_h, out_w);
    const double sy = static_cast<double>(map.height) / static_cast<double>(out_h);
    const double sx = static_cast<double>(map.width) / static_cast<double>(out_w);
    const long h = static_cast<long>(map.height), w = static_cast<long>(map.width);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
        const long y0 = static_cast<long>(std::floor(src_y));
        const double dy = src_y - static_cast<double>(y0);
        const long y0c = std::clamp(y0, 0L, h - 1), y1c = std::clamp(y0 + 1, 0L, h - 1);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const long x0 = static_cast<long>(std::floor(src_x));
            const double dx = src_x - static_cast<double>(x0);
            const long x0c = std::clamp(x0, 0L, w - 1), x1c = std::clamp(x0 + 1, 0L, w - 1);
            out.at(y, x) = (1.0 - dy) * ((1.0 - dx) * map.at(y0c, x0c) + dx * map.at(y0c, x1c)) +
                           dy * ((1.0 - dx) * map.at(y1c, x0c) + dx * map.at(y1c, x1c));
        }
    }
    return out;
}

ImageU8 hflip(const ImageU8& img) {
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

ImageU8 rotate90(const ImageU8& img, Rotate90 direction) {
    ImageU8 out(img.width, img.height, img.channels);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                if (direction == Rotate90::cw)
                    out.at(y, x, c) = img.at(img.height - 1 - x, y, c);
                else
                    out.at(y, x, c) = img.at(x, img.width - 1 - y, c);
            }
    return out;
}

ImageU8 rotate_small(const ImageU8& img, double degrees) {
    if (degrees < -45.0 || degrees > 45.0)
        throw std::invalid_argument("rotate_small: degrees must lie in [-45, 45]");
    const double rad = degrees * kPi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t y = 0; y < img.height; ++y) {
        const double ry = static_cast<double>(y) - cy;
        for (std::size_t x = 0; x < img.width; ++x) {
            const double rx = static_cast<double>(x) - cx;
            const double src_x = cs * rx + sn * ry + cx;
            const double src_y = -sn * rx + cs * ry + cy;
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = round_half_up_u8(sample_black(img, src_y, src_x, c));
        }
    }
    return out;
}

ImageU8 translate(const ImageU8& img, double dx_frac, double dy_frac) {
    const double dx = dx_frac * static_cast<double>(img.width);
    const double dy = dy_frac * static_cast<double>(img.height);
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t y = 0; y < img.height; ++y) {
        const double src_y = static_cast<double>(y) - dy;
        for (std::size_t x = 0; x < img.width; ++x) {
            const double src_x = static_cast<double>(x) - dx;
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = round_half_up_u8(sample_black(img, src_y, src_x, c));
        }
    }
    return out;
}

ImageU8 zoom(const ImageU8& img, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("zoom: scale must be positive");
    const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t y = 0; y < img.height; ++y) {
        const double src_y = (static_cast<double>(y) - cy) / scale + cy;
        for (std::size_t x = 0; x < img.width; ++x) {
            const double src_x = (static_cast<double>(x) - cx) / scale + cx;
            for (std::size_t c = 0; c < img.channels; ++c)
                out.at(y, x, c) = round_half_up_u8(sample_black(img, src_y, src_x, c));
        }
    }
    return out;
}

ImageU8 adjust_contrast(const ImageU8& img, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("adjust_contrast: factor must be positive");
    const std::size_t n = img.height * img.width;
    if (n == 0) return img;
    ImageU8 out(img.height, img.width, img.channels);
    for (std::size_t c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += img.pixels[i * img.channels + c];
        const double mean = sum / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = img.pixels[i * img.channels + c];
            out.pixels[i * img.channels + c] = round_half_up_u8(mean + factor * (p - mean));
        }
    }
    return out;
}

std::array<double, 3> jet(double v) {
    v = std::clamp(v, 0.0, 1.0);
    // Closed form of the documented piecewise-linear ramp.
    const double r = std::clamp(3.0 * v - 1.0, 0.0, 1.0);
    const double g = std::clamp(std::min(3.0 * v, 3.0 - 3.0 * v), 0.0, 1.0);
    const double b = std::clamp(2.0 - 3.0 * v, 0.0, 1.0);
    return {r, g, b};
}

ImageU8 overlay_heatmap(const ImageU8& img, const Heatmap& map, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("overlay_heatmap: alpha must lie in [0, 1]");
    const Heatmap* m = &map;
    Heatmap resized;
    if (map.height != img.height || map.width != img.width) {
        resized = resize_bilinear(map, img.height, img.width);
        m = &resized;
    }
    ImageU8 out(img.height, img.width, 3);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            const auto color = jet(m->at(y, x));
            for (std::size_t c = 0; c < 3; ++c) {
                const double base = img.channels == 1 ? img.at(y, x, 0) : img.at(y, x, c);
                out.at(y, x, c) =
                    round_half_up_u8((1.0 - alpha) * base + alpha * 255.0 * color[c]);
            }
        }
    return out;
}

}  // namespace vitmri
