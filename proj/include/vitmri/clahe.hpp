#pragma once

#include "vitmri/image.hpp"

namespace vitmri {

struct ClaheConfig {
    std::size_t tiles_x = 8;
    std::size_t tiles_y = 8;
    double clip_limit = 2.0;
    std::size_t bins = 256;
};

// Contrast-limited adaptive histogram equalization. Grayscale images are
// equalized directly; RGB images are converted to CIE LAB (D65) and only the
// L channel (rescaled to [0,255]) is equalized before converting back.
//
// Per tile of a tiles_x x tiles_y grid: histogram over `bins` bins, bins
// clipped at clip_limit * tile_pixels / bins with the excess redistributed
// uniformly in a single pass, then a CDF mapping to [0,255]. Each output
// pixel bilinearly blends the mappings of the four nearest tile centers
// (clamped at the borders, so a 1x1 grid degenerates to plain global
// histogram equalization).
ImageU8 clahe(const ImageU8& img, const ClaheConfig& cfg);

}  // namespace vitmri
