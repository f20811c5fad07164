#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace vitmri {

// 8-bit image, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct ImageU8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    ImageU8() = default;
    ImageU8(std::size_t h, std::size_t w, std::size_t c)
        : height(h), width(w), channels(c), pixels(h * w * c, 0) {
        if (c != 1 && c != 3)
            throw std::invalid_argument("ImageU8: channels must be 1 or 3, got " +
                                        std::to_string(c));
    }

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) {
        return pixels[(y * width + x) * channels + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }

    bool operator==(const ImageU8&) const = default;
};

// Thrown for malformed or undecodable image files.
struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Decoders. Grayscale sources load as 1 channel; everything else (palette,
// RGB, RGBA) is expanded/flattened to 3-channel RGB. 16-bit PNG is reduced
// to 8-bit.
ImageU8 load_png(const std::filesystem::path& path);
ImageU8 load_jpeg(const std::filesystem::path& path);
ImageU8 decode_png(const std::uint8_t* bytes, std::size_t size);
ImageU8 decode_jpeg(const std::uint8_t* bytes, std::size_t size);

// Dispatch on extension (.png/.jpg/.jpeg, case-insensitive).
ImageU8 load_image(const std::filesystem::path& path);
bool has_image_extension(const std::filesystem::path& path);

// PNG encoder with pinned settings (compression level 6, no adaptive
// filtering) so the same pixels always produce the same bytes.
void save_png(const std::filesystem::path& path, const ImageU8& img);
std::vector<std::uint8_t> encode_png(const ImageU8& img);

}  // namespace vitmri
