#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vldg/core.hpp"

namespace vldg {

/// Planar C x H x W pixel block. Raw loads are RGB in [0,1]; after
/// normalization values are unbounded.
struct Image {
    size_t channels = 0;
    size_t height = 0;
    size_t width = 0;
    std::vector<double> pixels;
    std::string domain;
    std::string sample_id;

    Image() = default;
    Image(size_t c, size_t h, size_t w)
        : channels(c), height(h), width(w), pixels(c * h * w, 0.0) {}

    double& at(size_t c, size_t y, size_t x) {
        return pixels[(c * height + y) * width + x];
    }
    double at(size_t c, size_t y, size_t x) const {
        return pixels[(c * height + y) * width + x];
    }

    size_t numel() const { return pixels.size(); }

    bool all_finite() const {
        for (double v : pixels)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline bool bit_equal(const Image& a, const Image& b) {
    return a.channels == b.channels && a.height == b.height && a.width == b.width &&
           a.pixels == b.pixels;
}

namespace detail {

/// Source coordinate for a destination pixel under half-pixel-center
/// bilinear resampling, clamped to the valid range.
inline double src_coord(size_t dst, size_t dst_size, size_t src_size) {
    double scale = static_cast<double>(src_size) / static_cast<double>(dst_size);
    double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(src_size - 1));
}

inline double sample_bilinear(const Image& img, size_t c, double y, double x) {
    const double yc = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const double xc = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const size_t y0 = static_cast<size_t>(yc);
    const size_t x0 = static_cast<size_t>(xc);
    const size_t y1 = std::min(y0 + 1, img.height - 1);
    const size_t x1 = std::min(x0 + 1, img.width - 1);
    const double fy = yc - static_cast<double>(y0);
    const double fx = xc - static_cast<double>(x0);
    const double top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
    const double bot = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

inline Image resize_bilinear(const Image& img, size_t side) {
    if (img.width == 0 || img.height == 0 || img.channels == 0)
        throw DataError("resize: zero-sized image");
    if (side == 0) throw DataError("resize: target side must be positive");
    if (img.height == side && img.width == side) return img;
    Image out(img.channels, side, side);
    out.domain = img.domain;
    out.sample_id = img.sample_id;
    for (size_t c = 0; c < img.channels; ++c)
        for (size_t y = 0; y < side; ++y) {
            const double sy = detail::src_coord(y, side, img.height);
            for (size_t x = 0; x < side; ++x) {
                const double sx = detail::src_coord(x, side, img.width);
                out.at(c, y, x) = detail::sample_bilinear(img, c, sy, sx);
            }
        }
    return out;
}

struct NormalizeStats {
    std::vector<double> mean;
    std::vector<double> std;

    static NormalizeStats identity(size_t channels) {
        return NormalizeStats{std::vector<double>(channels, 0.0),
                              std::vector<double>(channels, 1.0)};
    }
};

/// Bilinear resize to side x side, then per-channel (x - mean) / std.
/// A same-size input skips resampling entirely.
inline Image resize_and_normalize(const Image& img, size_t side, const NormalizeStats& stats) {
    Image out = resize_bilinear(img, side);
    if (stats.mean.size() != out.channels || stats.std.size() != out.channels)
        throw ConfigError("normalize: mean/std must have one entry per channel");
    bool ident = true;
    for (size_t c = 0; c < out.channels; ++c) {
        if (stats.std[c] == 0.0) throw ConfigError("normalize: zero std");
        ident = ident && stats.mean[c] == 0.0 && stats.std[c] == 1.0;
    }
    if (ident) return out;
    for (size_t c = 0; c < out.channels; ++c) {
        const double m = stats.mean[c], s = stats.std[c];
        for (size_t y = 0; y < out.height; ++y)
            for (size_t x = 0; x < out.width; ++x) out.at(c, y, x) = (out.at(c, y, x) - m) / s;
    }
    return out;
}

}  // namespace vldg
