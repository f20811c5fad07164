#include "vitmri/color.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vitmri {

namespace {

// D65 reference white.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t)
                                     : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
    constexpr double delta = 6.0 / 29.0;
    return f > delta ? f * f * f : 3.0 * delta * delta * (f - 4.0 / 29.0);
}

std::uint8_t quantize(double c01) {
    const double v = std::clamp(c01, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

}  // namespace

LabImage to_lab(const ImageU8& img) {
    if (img.channels != 3)
        throw std::invalid_argument("to_lab: expected 3-channel image, got " +
                                    std::to_string(img.channels));
    LabImage out;
    out.height = img.height;
    out.width = img.width;
    const std::size_t n = img.height * img.width;
    out.l.resize(n);
    out.a.resize(n);
    out.b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = srgb_to_linear(img.pixels[3 * i + 0] / 255.0);
        const double g = srgb_to_linear(img.pixels[3 * i + 1] / 255.0);
        const double b = srgb_to_linear(img.pixels[3 * i + 2] / 255.0);

        const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

        const double fx = lab_f(x / kXn);
        const double fy = lab_f(y / kYn);
        const double fz = lab_f(z / kZn);

        out.l[i] = 116.0 * fy - 16.0;
        out.a[i] = 500.0 * (fx - fy);
        out.b[i] = 200.0 * (fy - fz);
    }
    return out;
}

ImageU8 from_lab(const LabImage& lab) {
    const std::size_t n = lab.height * lab.width;
    if (lab.l.size() != n || lab.a.size() != n || lab.b.size() != n)
        throw std::invalid_argument("from_lab: plane sizes do not match dimensions");
    ImageU8 out(lab.height, lab.width, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double fy = (lab.l[i] + 16.0) / 116.0;
        const double fx = fy + lab.a[i] / 500.0;
        const double fz = fy - lab.b[i] / 200.0;

        const double x = kXn * lab_f_inv(fx);
        const double y = kYn * lab_f_inv(fy);
        const double z = kZn * lab_f_inv(fz);

        const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
        const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
        const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;

        out.pixels[3 * i + 0] = quantize(linear_to_srgb(r));
        out.pixels[3 * i + 1] = quantize(linear_to_srgb(g));
        out.pixels[3 * i + 2] = quantize(linear_to_srgb(b));
    }
    return out;
}

}  // namespace vitmri
