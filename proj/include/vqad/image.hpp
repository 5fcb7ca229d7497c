#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vqad/tensor.hpp"

namespace vqad {

/// One RGB frame, channels-first (3 x h*w), pixel values normalized to
/// [-1, 1]. Column index is y*w + x.
struct Image {
    MatXf data;
    int h = 0;
    int w = 0;

    Image() = default;
    Image(int h_, int w_) : data(MatXf::Zero(3, static_cast<Eigen::Index>(h_) * w_)), h(h_), w(w_) {}

    float& at(int c, int y, int x) { return data(c, static_cast<Eigen::Index>(y) * w + x); }
    float at(int c, int y, int x) const { return data(c, static_cast<Eigen::Index>(y) * w + x); }
};

/// 8-bit interleaved RGB buffer as read from or written to disk.
struct RawImage {
    std::vector<std::uint8_t> rgb;  // h*w*3, row-major
    int h = 0;
    int w = 0;
};

/// Linear map [0,255] -> [-1,1].
Image normalize_image(const RawImage& raw);
/// Inverse map with clamping and rounding to the nearest 8-bit level.
RawImage denormalize_image(const Image& img);

/// Decode a .png or .jpg/.jpeg file; grayscale inputs are replicated to RGB.
RawImage load_raw_image(const std::filesystem::path& file);
void save_png(const std::filesystem::path& file, const RawImage& raw);

/// Bilinear resample to (out_h, out_w).
Image resize_bilinear(const Image& img, int out_h, int out_w);

}  // namespace vqad
