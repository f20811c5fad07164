#pragma once

#include <array>
#include <vector>

#include "vitmri/image.hpp"

namespace vitmri {

// Scalar attention/heat map; values normalized to [0,1].
struct Heatmap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    Heatmap() = default;
    Heatmap(std::size_t h, std::size_t w) : height(h), width(w), values(h * w, 0.0) {}
    double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
    double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

enum class Rotate90 { cw, ccw };

// Half-pixel-center bilinear resampling with clamped borders. Resizing to
// the source dimensions reproduces the input exactly.
ImageU8 resize_bilinear(const ImageU8& img, std::size_t out_h, std::size_t out_w);
Heatmap resize_bilinear(const Heatmap& map, std::size_t out_h, std::size_t out_w);

ImageU8 hflip(const ImageU8& img);
ImageU8 rotate90(const ImageU8& img, Rotate90 direction);

// Bilinear-resampled geometry; samples falling outside the source are black.
// Positive degrees rotate the content clockwise on screen; degrees must be
// in [-45, 45]. translate shifts content by (dx_frac*W, dy_frac*H) pixels,
// positive meaning right/down. zoom > 1 magnifies about the image center.
ImageU8 rotate_small(const ImageU8& img, double degrees);
ImageU8 translate(const ImageU8& img, double dx_frac, double dy_frac);
ImageU8 zoom(const ImageU8& img, double scale);

// p -> clamp(mean + factor * (p - mean)) with a per-channel mean; factor > 0.
ImageU8 adjust_contrast(const ImageU8& img, double factor);

// Jet colormap: piecewise-linear ramp through the control points
//   0 -> (0,0,1), 1/3 -> (0,1,1), 2/3 -> (1,1,0), 1 -> (1,0,0)
// (blue, cyan, yellow, red), channels in [0,1].
std::array<double, 3> jet(double v);

// (1-alpha)*img + alpha*255*jet(v) per pixel, rounded half-up. Grayscale
// input is replicated to RGB; a map of different dimensions is bilinearly
// resized to the image first. Output is always 3-channel.
ImageU8 overlay_heatmap(const ImageU8& img, const Heatmap& map, double alpha = 0.45);

}  // namespace vitmri
