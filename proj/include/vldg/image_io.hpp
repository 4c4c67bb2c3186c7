#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "vldg/image.hpp"

namespace vldg {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError("cannot open " + path);
    return f;
}

/// Expand any libpng layout to 8-bit RGB rows.
inline Image read_png_file(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng info init failed");
    }
    std::vector<png_byte> buffer;
    std::vector<png_bytep> rows;
    png_uint_32 w = 0, h = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    buffer.resize(static_cast<size_t>(h) * png_get_rowbytes(png, info));
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = buffer.data() + static_cast<size_t>(y) * png_get_rowbytes(png, info);
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(3, h, w);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t c = 0; c < 3; ++c)
                img.at(c, y, x) = buffer[(y * w + x) * 3 + c] / 255.0;
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    JpegErrorMgr* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

inline Image read_jpeg_file(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("corrupt JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const size_t w = cinfo.output_width, h = cinfo.output_height;
    std::vector<JSAMPLE> row(w * 3);
    Image img(3, h, w);
    JSAMPROW rowp = row.data();
    for (size_t y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        for (size_t x = 0; x < w; ++x)
            for (size_t c = 0; c < 3; ++c) img.at(c, y, x) = row[x * 3 + c] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

}  // namespace detail

/// Decode a PNG or JPEG file to 3-channel RGB in [0,1]. Format is detected
/// from magic bytes, not the extension.
inline Image read_image(const std::string& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing image file: " + path);
    detail::FilePtr f = detail::open_file(path, "rb");
    unsigned char magic[4] = {0, 0, 0, 0};
    size_t got = std::fread(magic, 1, 4, f.get());
    f.reset();
    if (got >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
        return detail::read_png_file(path);
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return detail::read_jpeg_file(path);
    throw DataError("unsupported image format (expected PNG or JPEG): " + path);
}

/// Write 8-bit RGB JPEG; pixel values clamped to [0,1] and quantized.
inline void write_jpeg(const std::string& path, const Image& img, int quality = 95) {
    if (img.channels != 3 && img.channels != 1)
        throw DataError("write_jpeg: expected 1 or 3 channels");
    detail::FilePtr f = detail::open_file(path, "wb");
    jpeg_compress_struct cinfo;
    detail::JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw DataError("JPEG write failed: " + path);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f.get());
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    std::vector<JSAMPLE> row(img.width * 3);
    for (size_t y = 0; y < img.height; ++y) {
        for (size_t x = 0; x < img.width; ++x)
            for (size_t c = 0; c < 3; ++c) {
                const double v = img.at(img.channels == 1 ? 0 : c, y, x);
                row[x * 3 + c] = static_cast<JSAMPLE>(
                    std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        JSAMPROW rowp = row.data();
        jpeg_write_scanlines(&cinfo, &rowp, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

/// Write 8-bit RGB PNG; pixel values clamped to [0,1] and quantized.
inline void write_png(const std::string& path, const Image& img) {
    if (img.channels != 3 && img.channels != 1)
        throw DataError("write_png: expected 1 or 3 channels");
    detail::FilePtr f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(img.width * 3);
    for (size_t y = 0; y < img.height; ++y) {
        for (size_t x = 0; x < img.width; ++x)
            for (size_t c = 0; c < 3; ++c) {
                const double v = img.at(img.channels == 1 ? 0 : c, y, x);
                row[x * 3 + c] = static_cast<png_byte>(
                    std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace vldg
