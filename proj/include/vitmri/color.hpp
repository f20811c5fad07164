#pragma once

#include <vector>

#include "vitmri/image.hpp"

namespace vitmri {

// CIE LAB planes (D65 white), one double per pixel per plane.
struct LabImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> l, a, b;  // L in [0,100], a/b roughly [-128,127]
};

LabImage to_lab(const ImageU8& img);
ImageU8 from_lab(const LabImage& lab);

}  // namespace vitmri
