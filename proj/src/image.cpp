#include "vqad/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "vqad/errors.hpp"

namespace vqad {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& file, const char* mode) {
    FilePtr fp(std::fopen(file.string().c_str(), mode));
    if (!fp) throw IoError("cannot open " + file.string());
    return fp;
}

RawImage load_png_file(const std::filesystem::path& file) {
    FilePtr fp = open_file(file, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("corrupt PNG: " + file.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    RawImage out;
    out.w = static_cast<int>(png_get_image_width(png, info));
    out.h = static_cast<int>(png_get_image_height(png, info));
    out.rgb.resize(static_cast<size_t>(out.h) * out.w * 3);
    std::vector<png_bytep> rows(out.h);
    for (int y = 0; y < out.h; ++y) rows[y] = out.rgb.data() + static_cast<size_t>(y) * out.w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

struct JpegErrorMgr {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

RawImage load_jpeg_file(const std::filesystem::path& file) {
    FilePtr fp = open_file(file, "rb");
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw LoadError("corrupt JPEG: " + file.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    RawImage out;
    out.w = static_cast<int>(cinfo.output_width);
    out.h = static_cast<int>(cinfo.output_height);
    out.rgb.resize(static_cast<size_t>(out.h) * out.w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.rgb.data() + static_cast<size_t>(cinfo.output_scanline) * out.w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

}  // namespace

Image normalize_image(const RawImage& raw) {
    Image img(raw.h, raw.w);
    const Eigen::Index n = static_cast<Eigen::Index>(raw.h) * raw.w;
    for (Eigen::Index p = 0; p < n; ++p) {
        for (int c = 0; c < 3; ++c)
            img.data(c, p) = static_cast<float>(raw.rgb[static_cast<size_t>(p) * 3 + c]) / 127.5f - 1.0f;
    }
    return img;
}

RawImage denormalize_image(const Image& img) {
    RawImage raw;
    raw.h = img.h;
    raw.w = img.w;
    const Eigen::Index n = static_cast<Eigen::Index>(img.h) * img.w;
    raw.rgb.resize(static_cast<size_t>(n) * 3);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (int c = 0; c < 3; ++c) {
            const float v = (std::clamp(img.data(c, p), -1.0f, 1.0f) + 1.0f) * 127.5f;
            raw.rgb[static_cast<size_t>(p) * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return raw;
}

RawImage load_raw_image(const std::filesystem::path& file) {
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") return load_png_file(file);
    if (ext == ".jpg" || ext == ".jpeg") return load_jpeg_file(file);
    throw LoadError("unsupported image extension '" + ext + "' for " + file.string());
}

void save_png(const std::filesystem::path& file, const RawImage& raw) {
    FilePtr fp = open_file(file, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + file.string());
    }
    png_init_io(png, fp.get());
    // Fixed settings keep output byte-identical across runs.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, raw.w, raw.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(raw.h);
    for (int y = 0; y < raw.h; ++y)
        rows[y] = const_cast<png_bytep>(raw.rgb.data() + static_cast<size_t>(y) * raw.w * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ConfigError("resize_bilinear: non-positive target size");
    if (out_h == img.h && out_w == img.w) return img;
    Image out(out_h, out_w);
    const float sy = static_cast<float>(img.h) / out_h;
    const float sx = static_cast<float>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
        const int y0 = std::min(static_cast<int>(fy), img.h - 1);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const float wy = fy - static_cast<float>(y0);
        for (int x = 0; x < out_w; ++x) {
            const float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
            const int x0 = std::min(static_cast<int>(fx), img.w - 1);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const float wx = fx - static_cast<float>(x0);
            for (int c = 0; c < 3; ++c) {
                const float top = img.at(c, y0, x0) * (1.0f - wx) + img.at(c, y0, x1) * wx;
                const float bot = img.at(c, y1, x0) * (1.0f - wx) + img.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace vqad
