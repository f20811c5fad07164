#include "vitmri/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <csetjmp>
#include <fstream>

namespace vitmri {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw ImageError("read failed for " + path.string());
    return bytes;
}

struct PngReadState {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
    std::string error;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + n > st->size) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, st->data + st->pos, n);
    st->pos += n;
}

void png_error_cb(png_structp png, png_const_charp msg) {
    auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
    if (st) st->error = msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warn_cb(png_structp, png_const_charp) {}

struct PngWriteState {
    std::vector<std::uint8_t>* out;
    std::string error;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
    auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
    st->out->insert(st->out->end(), data, data + n);
}

void png_flush_cb(png_structp) {}

void png_write_error_cb(png_structp png, png_const_charp msg) {
    auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
    if (st) st->error = msg;
    longjmp(png_jmpbuf(png), 1);
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    longjmp(err->jump, 1);
}

void jpeg_emit_nothing(j_common_ptr, int) {}

}  // namespace

ImageU8 decode_png(const std::uint8_t* bytes, std::size_t size) {
    if (size < 8 || png_sig_cmp(bytes, 0, 8) != 0)
        throw ImageError("not a PNG file");

    PngReadState st{bytes, size, 0, {}};
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_cb, png_warn_cb);
    if (!png) throw ImageError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("png_create_info_struct failed");
    }

    std::vector<png_bytep> row_ptrs;
    ImageU8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("PNG decode error: " + (st.error.empty() ? "unknown" : st.error));
    }

    png_set_read_fn(png, &st, png_read_cb);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int out_channels = png_get_channels(png, info);
    if (out_channels != 1 && out_channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("PNG decode produced " + std::to_string(out_channels) + " channels");
    }

    img = ImageU8(h, w, static_cast<std::size_t>(out_channels));
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        row_ptrs[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * out_channels;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

ImageU8 load_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_png(bytes.data(), bytes.size());
    } catch (const ImageError& e) {
        throw ImageError(path.string() + ": " + e.what());
    }
}

ImageU8 decode_jpeg(const std::uint8_t* bytes, std::size_t size) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_emit_nothing;
    err.message[0] = '\0';

    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageError(std::string("JPEG decode error: ") + err.message);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes, static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);

    if (cinfo.jpeg_color_space == JCS_GRAYSCALE)
        cinfo.out_color_space = JCS_GRAYSCALE;
    else
        cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const std::size_t w = cinfo.output_width;
    const std::size_t h = cinfo.output_height;
    const std::size_t c = cinfo.output_components;
    if (c != 1 && c != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageError("JPEG decode produced " + std::to_string(c) + " components");
    }

    ImageU8 img(h, w, c);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.pixels.data() + cinfo.output_scanline * w * c;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

ImageU8 load_jpeg(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_jpeg(bytes.data(), bytes.size());
    } catch (const ImageError& e) {
        throw ImageError(path.string() + ": " + e.what());
    }
}

bool has_image_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

ImageU8 load_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".png") return load_png(path);
    if (ext == ".jpg" || ext == ".jpeg") return load_jpeg(path);
    throw ImageError("unsupported image extension '" + ext + "' for " + path.string());
}

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    if (img.height == 0 || img.width == 0) throw ImageError("encode_png: empty image");
    if (img.channels != 1 && img.channels != 3)
        throw ImageError("encode_png: unsupported channel count");

    std::vector<std::uint8_t> out;
    PngWriteState st{&out, {}};
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, png_write_error_cb, png_warn_cb);
    if (!png) throw ImageError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("png_create_info_struct failed");
    }

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("PNG encode error: " + (st.error.empty() ? "unknown" : st.error));
    }

    png_set_write_fn(png, &st, png_write_cb, png_flush_cb);
    // Pinned encoder settings: fixed zlib level, no adaptive per-row filter
    // choice. Identical pixels yield byte-identical files.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);

    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + y * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

void save_png(const std::filesystem::path& path, const ImageU8& img) {
    const auto bytes = encode_png(img);
    std::ofstream outf(path, std::ios::binary | std::ios::trunc);
    if (!outf) throw ImageError("cannot open for write: " + path.string());
    outf.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!outf.good()) throw ImageError("write failed for " + path.string());
}

}  // namespace vitmri
