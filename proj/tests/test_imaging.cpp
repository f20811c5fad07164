#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "testutil.hpp"
#include "vitmri/clahe.hpp"
#include "vitmri/color.hpp"
#include "vitmri/image.hpp"
#include "vitmri/rng.hpp"
#include "vitmri/transforms.hpp"

using namespace vitmri;
using testutil::TempDir;

namespace {

ImageU8 gradient_image(std::size_t size) {
    ImageU8 img(size, size, 1);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            img.at(y, x) = static_cast<std::uint8_t>((x * 255) / (size - 1));
    return img;
}

ImageU8 noise_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    RngStream rng(seed);
    ImageU8 img(h, w, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

// ---------------------------------------------------------------- decoding

TEST_CASE("png: grayscale fixture decodes to the authored pixels") {
    const ImageU8 img = decode_png(fixtures::kPng3x3Gray, sizeof(fixtures::kPng3x3Gray));
    REQUIRE(img.height == 3);
    REQUIRE(img.width == 3);
    REQUIRE(img.channels == 1);
    CHECK(img.at(0, 0) == 10);
    CHECK(img.at(1, 1) == 128);
    CHECK(img.at(2, 2) == 200);
    CHECK(img.at(0, 1) == 0);
    CHECK(img.at(2, 0) == 0);
}

TEST_CASE("png: black fixture and rgb fixture decode correctly") {
    const ImageU8 black = decode_png(fixtures::kPng2x2Black, sizeof(fixtures::kPng2x2Black));
    REQUIRE(black.height == 2);
    REQUIRE(black.width == 2);
    for (auto p : black.pixels) CHECK(p == 0);

    const ImageU8 rgb = decode_png(fixtures::kPng4x2Rgb, sizeof(fixtures::kPng4x2Rgb));
    REQUIRE(rgb.height == 2);
    REQUIRE(rgb.width == 4);
    REQUIRE(rgb.channels == 3);
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            CHECK(rgb.at(y, x, 0) == 60 * x);
            CHECK(rgb.at(y, x, 1) == 100 * y);
            CHECK(rgb.at(y, x, 2) == 30);
        }
}

TEST_CASE("png: palette images expand to rgb") {
    const ImageU8 img = decode_png(fixtures::kPng2x2Palette, sizeof(fixtures::kPng2x2Palette));
    REQUIRE(img.channels == 3);
    REQUIRE(img.height == 2);
    const auto px = [&](std::size_t y, std::size_t x) {
        return std::array<int, 3>{img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
    };
    CHECK(px(0, 0) == std::array<int, 3>{0, 0, 0});
    CHECK(px(0, 1) == std::array<int, 3>{255, 0, 0});
    CHECK(px(1, 0) == std::array<int, 3>{0, 255, 0});
    CHECK(px(1, 1) == std::array<int, 3>{0, 0, 255});
}

TEST_CASE("png: 16-bit grayscale strips to 8 bits") {
    const ImageU8 img = decode_png(fixtures::kPng2x2Gray16, sizeof(fixtures::kPng2x2Gray16));
    REQUIRE(img.channels == 1);
    CHECK(img.at(0, 0) == 0);
    CHECK(img.at(0, 1) == 255);
    CHECK(img.at(1, 0) == 128);
    CHECK(img.at(1, 1) == 1);
}

TEST_CASE("jpeg: rgb halves and constant grayscale decode within tolerance") {
    const ImageU8 rgb = decode_jpeg(fixtures::kJpeg8x8Rgb, sizeof(fixtures::kJpeg8x8Rgb));
    REQUIRE(rgb.height == 8);
    REQUIRE(rgb.width == 8);
    REQUIRE(rgb.channels == 3);
    for (std::size_t y : {1, 6}) {
        CHECK(rgb.at(y, 1, 0) > 200);
        CHECK(rgb.at(y, 1, 2) < 60);
        CHECK(rgb.at(y, 6, 2) > 200);
        CHECK(rgb.at(y, 6, 0) < 60);
    }

    const ImageU8 gray = decode_jpeg(fixtures::kJpeg6x6Gray, sizeof(fixtures::kJpeg6x6Gray));
    REQUIRE(gray.height == 6);
    REQUIRE(gray.channels == 1);
    for (auto p : gray.pixels) CHECK(std::abs(static_cast<int>(p) - 120) <= 2);
}

TEST_CASE("decoding rejects garbage and truncated data") {
    const std::uint8_t junk[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS(decode_png(junk, sizeof(junk)), ImageError);
    CHECK_THROWS_AS(decode_jpeg(junk, sizeof(junk)), ImageError);
    CHECK_THROWS_AS(decode_png(fixtures::kPng3x3Gray, 20), ImageError);
    CHECK_THROWS_AS(decode_jpeg(fixtures::kJpeg6x6Gray, 20), ImageError);
}

TEST_CASE("png: encode/decode round-trips and encoding is deterministic") {
    for (std::size_t c : {std::size_t{1}, std::size_t{3}}) {
        const ImageU8 img = noise_image(13, 9, c, 100 + c);
        const auto bytes = encode_png(img);
        const ImageU8 back = decode_png(bytes.data(), bytes.size());
        CHECK(back == img);
        CHECK(encode_png(img) == bytes);
    }
}

TEST_CASE("image files: save/load round-trip and extension dispatch") {
    TempDir tmp("imstore");
    const ImageU8 img = noise_image(5, 7, 3, 3);
    const auto png_path = tmp.path() / "a.png";
    save_png(png_path, img);
    CHECK(load_png(png_path) == img);
    CHECK(load_image(png_path) == img);

    const auto jpg_path = tmp.path() / "b.jpg";
    std::ofstream(jpg_path, std::ios::binary)
        .write(reinterpret_cast<const char*>(fixtures::kJpeg6x6Gray),
               sizeof(fixtures::kJpeg6x6Gray));
    const ImageU8 jp = load_image(jpg_path);
    CHECK(jp.height == 6);

    CHECK_THROWS_AS(load_png(tmp.path() / "missing.png"), ImageError);
    CHECK_THROWS_AS(load_image(tmp.path() / "c.txt"), ImageError);
}

TEST_CASE("has_image_extension recognizes png/jpg/jpeg case-insensitively") {
    CHECK(has_image_extension("x.png"));
    CHECK(has_image_extension("x.jpg"));
    CHECK(has_image_extension("x.jpeg"));
    CHECK(has_image_extension("x.PNG"));
    CHECK(has_image_extension("dir/y.JPeG"));
    CHECK_FALSE(has_image_extension("x.txt"));
    CHECK_FALSE(has_image_extension("x.png.bak"));
    CHECK_FALSE(has_image_extension("png"));
}

TEST_CASE("ImageU8 rejects unsupported channel counts") {
    CHECK_THROWS_AS(ImageU8(2, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(ImageU8(2, 2, 4), std::invalid_argument);
}

// ---------------------------------------------------------------- transforms

TEST_CASE("resize_bilinear: identity, constant and checkerboard oracle") {
    const ImageU8 img = noise_image(6, 5, 3, 4);
    CHECK(resize_bilinear(img, 6, 5) == img);

    const ImageU8 flat = [&] {
        ImageU8 f(5, 7, 1);
        for (auto& p : f.pixels) p = 77;
        return f;
    }();
    const ImageU8 small = resize_bilinear(flat, 3, 3);
    for (auto p : small.pixels) CHECK(p == 77);

    ImageU8 checker(2, 2, 1);
    checker.at(0, 0) = 0;
    checker.at(0, 1) = 255;
    checker.at(1, 0) = 255;
    checker.at(1, 1) = 0;
    const ImageU8 up = resize_bilinear(checker, 4, 4);
    const std::uint8_t want[16] = {0,  64,  191, 255, 64,  96,  159, 191,
                                   191, 159, 96,  64,  255, 191, 64,  0};
    for (std::size_t i = 0; i < 16; ++i) CHECK(up.pixels[i] == want[i]);

    CHECK_THROWS_AS(resize_bilinear(img, 0, 4), std::invalid_argument);
}

TEST_CASE("hflip is an involution with the expected layout") {
    const ImageU8 img = noise_image(4, 6, 3, 5);
    const ImageU8 flipped = hflip(img);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(flipped.at(y, x, c) == img.at(y, 5 - x, c));
    CHECK(hflip(flipped) == img);
}

TEST_CASE("rotate90: cw/ccw invert each other and four turns cycle") {
    const ImageU8 img = noise_image(3, 5, 1, 6);
    const ImageU8 cw = rotate90(img, Rotate90::cw);
    REQUIRE(cw.height == 5);
    REQUIRE(cw.width == 3);
    // Top-left of the source ends up top-right after a clockwise turn.
    CHECK(cw.at(0, 2) == img.at(0, 0));
    CHECK(rotate90(cw, Rotate90::ccw) == img);

    ImageU8 turned = img;
    for (int i = 0; i < 4; ++i) turned = rotate90(turned, Rotate90::cw);
    CHECK(turned == img);
}

TEST_CASE("adjust_contrast: identity at 1.0 and mean-anchored scaling") {
    const ImageU8 img = noise_image(4, 4, 3, 7);
    CHECK(adjust_contrast(img, 1.0) == img);

    ImageU8 two(1, 2, 1);
    two.at(0, 0) = 0;
    two.at(0, 1) = 100;  // mean 50
    const ImageU8 stretched = adjust_contrast(two, 2.0);
    CHECK(stretched.at(0, 0) == 0);    // 50 + 2*(0-50) = -50, clamped
    CHECK(stretched.at(0, 1) == 150);  // 50 + 2*50

    ImageU8 wide(1, 2, 1);
    wide.at(0, 0) = 0;
    wide.at(0, 1) = 200;  // mean 100
    const ImageU8 clipped = adjust_contrast(wide, 2.0);
    CHECK(clipped.at(0, 0) == 0);
    CHECK(clipped.at(0, 1) == 255);  // 100 + 2*100 = 300, clamped

    CHECK_THROWS_AS(adjust_contrast(img, 0.0), std::invalid_argument);
}

TEST_CASE("jet colormap hits its control points") {
    const auto close = [](const std::array<double, 3>& got, double r, double g, double b) {
        CHECK(got[0] == doctest::Approx(r).epsilon(1e-12));
        CHECK(got[1] == doctest::Approx(g).epsilon(1e-12));
        CHECK(got[2] == doctest::Approx(b).epsilon(1e-12));
    };
    close(jet(0.0), 0, 0, 1);
    close(jet(1.0 / 3.0), 0, 1, 1);
    close(jet(2.0 / 3.0), 1, 1, 0);
    close(jet(1.0), 1, 0, 0);
    close(jet(0.5), 0.5, 1, 0.5);
    close(jet(-3.0), 0, 0, 1);  // clamped
    close(jet(9.0), 1, 0, 0);
}

TEST_CASE("overlay_heatmap: alpha endpoints and the midpoint color") {
    const ImageU8 img = noise_image(4, 4, 3, 8);
    Heatmap map(4, 4);
    for (auto& v : map.values) v = 1.0;

    CHECK(overlay_heatmap(img, map, 0.0) == img);

    const ImageU8 full = overlay_heatmap(img, map, 1.0);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            CHECK(full.at(y, x, 0) == 255);
            CHECK(full.at(y, x, 1) == 0);
            CHECK(full.at(y, x, 2) == 0);
        }

    ImageU8 black(2, 2, 3);
    Heatmap half(2, 2);
    for (auto& v : half.values) v = 0.5;
    const ImageU8 mid = overlay_heatmap(black, half, 0.45);
    CHECK(mid.at(0, 0, 0) == 57);   // 0.45*255*0.5 = 57.375
    CHECK(mid.at(0, 0, 1) == 115);  // 0.45*255*1.0 = 114.75
    CHECK(mid.at(0, 0, 2) == 57);

    // Grayscale bases broadcast to all three output channels.
    ImageU8 gray(2, 2, 1);
    for (auto& p : gray.pixels) p = 200;
    Heatmap zero(2, 2);
    const ImageU8 over_gray = overlay_heatmap(gray, zero, 0.0);
    REQUIRE(over_gray.channels == 3);
    CHECK(over_gray.at(1, 1, 0) == 200);
    CHECK(over_gray.at(1, 1, 1) == 200);
    CHECK(over_gray.at(1, 1, 2) == 200);

    // Smaller maps are resized up to the image before blending.
    Heatmap tiny(2, 2);
    for (auto& v : tiny.values) v = 1.0;
    const ImageU8 upscaled = overlay_heatmap(noise_image(8, 8, 3, 9), tiny, 1.0);
    CHECK(upscaled.at(3, 3, 0) == 255);

    CHECK_THROWS_AS(overlay_heatmap(img, map, 1.5), std::invalid_argument);
}

// ---------------------------------------------------------------- color

TEST_CASE("lab: white and black anchors") {
    ImageU8 white(1, 1, 3);
    white.pixels = {255, 255, 255};
    const LabImage wl = to_lab(white);
    CHECK(std::fabs(wl.l[0] - 100.0) < 0.1);
    CHECK(std::fabs(wl.a[0]) < 0.5);
    CHECK(std::fabs(wl.b[0]) < 0.5);

    ImageU8 black(1, 1, 3);
    const LabImage bl = to_lab(black);
    CHECK(std::fabs(bl.l[0]) < 1e-9);
}

TEST_CASE("lab: round-trip error is at most one level per channel") {
    const ImageU8 img = noise_image(16, 16, 3, 10);
    const ImageU8 back = from_lab(to_lab(img));
    REQUIRE(back.channels == 3);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(static_cast<int>(back.pixels[i]) - static_cast<int>(img.pixels[i])) <= 1);
}

// ---------------------------------------------------------------- clahe

TEST_CASE("clahe: constant images stay constant") {
    ImageU8 img(32, 32, 1);
    for (auto& p : img.pixels) p = 90;
    const ImageU8 out = clahe(img, ClaheConfig{});
    for (auto p : out.pixels) CHECK(p == out.pixels[0]);
}

TEST_CASE("clahe: a huge clip limit matches the unclipped reference") {
    const ImageU8 img = noise_image(40, 48, 1, 11);
    ClaheConfig cfg;
    cfg.tiles_x = 4;
    cfg.tiles_y = 4;
    cfg.clip_limit = 1e9;
    const ImageU8 got = clahe(img, cfg);
    const ImageU8 want = testutil::reference_clahe_gray(img, 4, 4, 0.0);
    CHECK(got == want);
}

TEST_CASE("clahe: gradient through a 2x2 grid matches the reference exactly") {
    const ImageU8 img = gradient_image(64);
    ClaheConfig cfg;
    cfg.tiles_x = 2;
    cfg.tiles_y = 2;
    cfg.clip_limit = 2.0;
    CHECK(clahe(img, cfg) == testutil::reference_clahe_gray(img, 2, 2, 2.0));

    // And the default 8x8 grid on noisy data.
    const ImageU8 noisy = noise_image(64, 64, 1, 12);
    CHECK(clahe(noisy, ClaheConfig{}) == testutil::reference_clahe_gray(noisy, 8, 8, 2.0));
}

TEST_CASE("clahe: 1x1 grid degenerates to global histogram equalization") {
    const ImageU8 img = noise_image(32, 32, 1, 13);
    ClaheConfig cfg;
    cfg.tiles_x = 1;
    cfg.tiles_y = 1;
    cfg.clip_limit = 1e9;  // effectively unclipped
    CHECK(clahe(img, cfg) == testutil::reference_global_he(img));
}

TEST_CASE("clahe: fewer bins still matches the reference") {
    const ImageU8 img = noise_image(32, 32, 1, 14);
    ClaheConfig cfg;
    cfg.tiles_x = 2;
    cfg.tiles_y = 2;
    cfg.clip_limit = 3.0;
    cfg.bins = 64;
    CHECK(clahe(img, cfg) == testutil::reference_clahe_gray(img, 2, 2, 3.0, 64));
}

TEST_CASE("clahe: rgb path equalizes luminance only and is deterministic") {
    const ImageU8 img = noise_image(32, 32, 3, 15);
    const ImageU8 a = clahe(img, ClaheConfig{});
    const ImageU8 b = clahe(img, ClaheConfig{});
    REQUIRE(a.channels == 3);
    CHECK(a == b);
    CHECK(a.pixels != img.pixels);  // something actually changed

    // A neutral gray ramp keeps r == g == b through the LAB round trip.
    ImageU8 neutral(16, 16, 3);
    RngStream rng(16);
    for (std::size_t i = 0; i < 16 * 16; ++i) {
        const auto v = static_cast<std::uint8_t>(rng.below(256));
        neutral.pixels[3 * i] = neutral.pixels[3 * i + 1] = neutral.pixels[3 * i + 2] = v;
    }
    const ImageU8 eq = clahe(neutral, ClaheConfig{});
    for (std::size_t i = 0; i < 16 * 16; ++i) {
        const int r = eq.pixels[3 * i], g = eq.pixels[3 * i + 1], bl = eq.pixels[3 * i + 2];
        CHECK(std::abs(r - g) <= 1);
        CHECK(std::abs(r - bl) <= 1);
    }
}

TEST_CASE("clahe: invalid configurations are rejected") {
    const ImageU8 img = noise_image(32, 32, 1, 17);
    ClaheConfig bad;
    bad.tiles_x = 0;
    CHECK_THROWS_AS(clahe(img, bad), std::invalid_argument);
    bad = ClaheConfig{};
    bad.clip_limit = 0.0;
    CHECK_THROWS_AS(clahe(img, bad), std::invalid_argument);
    bad = ClaheConfig{};
    bad.bins = 0;
    CHECK_THROWS_AS(clahe(img, bad), std::invalid_argument);
    bad = ClaheConfig{};
    bad.bins = 257;
    CHECK_THROWS_AS(clahe(img, bad), std::invalid_argument);

    const ImageU8 small = noise_image(4, 4, 1, 18);
    CHECK_THROWS_AS(clahe(small, ClaheConfig{}), std::invalid_argument);  // 8x8 grid
}
