#pragma once

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "panostage/image.hpp"

namespace panostage {

namespace png_detail {

struct FileHandle {
    std::FILE* fp = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

struct Decoded {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> bytes;  // 8-bit, palette kept as indices when indexed = true
    bool indexed = false;
};

inline Decoded read_png_bytes(const std::string& path, bool keep_palette_indices) {
    FileHandle f(path, "rb");
    if (!f.fp) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: decode failed for " + path);
    }
    png_init_io(png, f.fp);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    Decoded out;
    out.indexed = color_type == PNG_COLOR_TYPE_PALETTE && keep_palette_indices;
    if (!out.indexed && color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (bit_depth < 8) png_set_packing(png);
    if (!out.indexed && png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    out.width = int(png_get_image_width(png, info));
    out.height = int(png_get_image_height(png, info));
    out.channels = int(png_get_channels(png, info));

    const size_t stride = png_get_rowbytes(png, info);
    out.bytes.resize(stride * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png_bytes(const std::string& path, int width, int height, int channels,
                            const uint8_t* bytes) {
    FileHandle f(path, "wb");
    if (!f.fp) throw std::runtime_error("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: encode failed for " + path);
    }
    png_init_io(png, f.fp);
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, width, height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(bytes + size_t(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace png_detail

// 8-bit RGB image from PNG; gray expands to RGB, alpha is dropped.
inline LdrImage read_png(const std::string& path) {
    auto d = png_detail::read_png_bytes(path, false);
    LdrImage img(d.width, d.height);
    const size_t stride = size_t(d.width) * d.channels;
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            const uint8_t* src = d.bytes.data() + stride * y + size_t(x) * d.channels;
            uint8_t* dst = img.pixel(x, y);
            if (d.channels >= 3) {
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
            } else {
                dst[0] = dst[1] = dst[2] = src[0];
            }
        }
    }
    return img;
}

inline void write_png(const std::string& path, const LdrImage& img) {
    png_detail::write_png_bytes(path, img.width, img.height, 3, img.rgb.data());
}

// Masks travel as single-channel PNG: 0 = off, 255 = on.
inline Mask read_mask_png(const std::string& path, MaskLabel label = MaskLabel::generic) {
    auto d = png_detail::read_png_bytes(path, false);
    Mask m(d.width, d.height, label);
    const size_t stride = size_t(d.width) * d.channels;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            m.set(x, y, d.bytes[stride * y + size_t(x) * d.channels] > 127);
    return m;
}

inline void write_mask_png(const std::string& path, const Mask& mask) {
    std::vector<uint8_t> bytes(mask.grid.data.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.grid.data[i] ? 255 : 0;
    png_detail::write_png_bytes(path, mask.width(), mask.height(), 1, bytes.data());
}

// Segmentation label map: indexed PNG keeps palette indices, gray PNG uses
// the gray value as the class index.
inline Image<uint8_t> read_label_png(const std::string& path) {
    auto d = png_detail::read_png_bytes(path, true);
    Image<uint8_t> img(d.width, d.height);
    const size_t stride = d.bytes.size() / d.height;
    const size_t pixel_step = stride / d.width;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            img.at(x, y) = d.bytes[stride * y + size_t(x) * pixel_step];
    return img;
}

inline void write_label_png(const std::string& path, const Image<uint8_t>& labels) {
    png_detail::write_png_bytes(path, labels.width, labels.height, 1, labels.data.data());
}

namespace jpeg_detail {

struct ErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<ErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

}  // namespace jpeg_detail

inline LdrImage read_jpeg(const std::string& path) {
    png_detail::FileHandle f(path, "rb");
    if (!f.fp) throw std::runtime_error("read_jpeg: cannot open " + path);

    jpeg_decompress_struct cinfo;
    jpeg_detail::ErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_detail::error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("read_jpeg: decode failed for " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    LdrImage img(int(cinfo.output_width), int(cinfo.output_height));
    while (cinfo.output_scanline < cinfo.output_height) {
        uint8_t* row = img.pixel(0, int(cinfo.output_scanline));
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

// Loads an LDR image by extension; values scaled to [0,1].
inline Image<vec3> read_ldr_linear(const std::string& path) {
    auto lower = path;
    for (char& c : lower) c = char(std::tolower(c));
    LdrImage ldr;
    if (lower.size() >= 4 && lower.compare(lower.size() - 4, 4, ".png") == 0)
        ldr = read_png(path);
    else if ((lower.size() >= 4 && lower.compare(lower.size() - 4, 4, ".jpg") == 0) ||
             (lower.size() >= 5 && lower.compare(lower.size() - 5, 5, ".jpeg") == 0))
        ldr = read_jpeg(path);
    else
        throw std::runtime_error("read_ldr_linear: unsupported extension in " + path);

    Image<vec3> out(ldr.width, ldr.height);
    for (int y = 0; y < ldr.height; ++y) {
        for (int x = 0; x < ldr.width; ++x) {
            const uint8_t* p = ldr.pixel(x, y);
            out.at(x, y) = vec3(p[0] / 255.0, p[1] / 255.0, p[2] / 255.0);
        }
    }
    return out;
}

}  // namespace panostage
