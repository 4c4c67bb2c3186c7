#pragma once

#include <cmath>
#include <vector>

#include "vldg/image.hpp"
#include "vldg/rng.hpp"

namespace vldg {

/// Training-time augmentation knobs. Probabilities are per-op; parameters
/// are drawn only for ops that fire.
struct AugmentConfig {
    double flip_p = 0.5;
    double grayscale_p = 0.1;
    double jitter_p = 0.5;
    double jitter_strength = 0.2;
    double rotation_p = 0.5;
    double rotation_max_deg = 15.0;
    double translate_p = 0.5;
    double translate_max_frac = 0.1;
    double blur_p = 0.5;
    double blur_sigma_lo = 0.1;
    double blur_sigma_hi = 2.0;

    static AugmentConfig off() {
        AugmentConfig c;
        c.flip_p = c.grayscale_p = c.jitter_p = c.rotation_p = c.translate_p = c.blur_p = 0.0;
        return c;
    }
};

namespace detail {

inline Image hflip(const Image& img) {
    Image out = img;
    for (size_t c = 0; c < img.channels; ++c)
        for (size_t y = 0; y < img.height; ++y)
            for (size_t x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

inline double luminance(const Image& img, size_t y, size_t x) {
    if (img.channels < 3) return img.at(0, y, x);
    return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

inline Image to_grayscale(const Image& img) {
    Image out = img;
    for (size_t y = 0; y < img.height; ++y)
        for (size_t x = 0; x < img.width; ++x) {
            const double l = luminance(img, y, x);
            for (size_t c = 0; c < img.channels; ++c) out.at(c, y, x) = l;
        }
    return out;
}

inline Image color_jitter(const Image& img, double brightness, double contrast,
                          double saturation) {
    Image out = img;
    for (double& v : out.pixels) v *= brightness;
    double mean_lum = 0.0;
    for (size_t y = 0; y < out.height; ++y)
        for (size_t x = 0; x < out.width; ++x) mean_lum += luminance(out, y, x);
    mean_lum /= static_cast<double>(out.height * out.width);
    for (double& v : out.pixels) v = (v - mean_lum) * contrast + mean_lum;
    if (out.channels >= 3) {
        for (size_t y = 0; y < out.height; ++y)
            for (size_t x = 0; x < out.width; ++x) {
                const double l = luminance(out, y, x);
                for (size_t c = 0; c < out.channels; ++c)
                    out.at(c, y, x) = l + saturation * (out.at(c, y, x) - l);
            }
    }
    return out;
}

/// Inverse-map affine sample: dst(y,x) = src(rotate+shift applied backward),
/// bilinear with border clamp.
inline Image affine(const Image& img, double angle_rad, double dy, double dx) {
    Image out = img;
    const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
    const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
    for (size_t c = 0; c < img.channels; ++c)
        for (size_t y = 0; y < img.height; ++y)
            for (size_t x = 0; x < img.width; ++x) {
                const double ry = static_cast<double>(y) - dy - cy;
                const double rx = static_cast<double>(x) - dx - cx;
                const double sy = ca * ry + sa * rx + cy;
                const double sx = -sa * ry + ca * rx + cx;
                out.at(c, y, x) = sample_bilinear(img, c, sy, sx);
            }
    return out;
}

inline Image gaussian_blur(const Image& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[static_cast<size_t>(i + radius)];
    }
    for (double& k : kernel) k /= sum;

    const auto clampi = [](long v, long hi) { return std::clamp(v, 0l, hi); };
    Image tmp = img;
    for (size_t c = 0; c < img.channels; ++c)
        for (size_t y = 0; y < img.height; ++y)
            for (size_t x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           img.at(c, y, static_cast<size_t>(clampi(
                                             static_cast<long>(x) + i,
                                             static_cast<long>(img.width) - 1)));
                tmp.at(c, y, x) = acc;
            }
    Image out = tmp;
    for (size_t c = 0; c < img.channels; ++c)
        for (size_t y = 0; y < img.height; ++y)
            for (size_t x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           tmp.at(c, static_cast<size_t>(clampi(
                                          static_cast<long>(y) + i,
                                          static_cast<long>(img.height) - 1)),
                                  x);
                out.at(c, y, x) = acc;
            }
    return out;
}

}  // namespace detail

/// Apply the configured ops in a fixed order: flip, grayscale, color jitter,
/// rotation, translation, blur. Shape is preserved; an all-zero config
/// returns the input bit-for-bit.
inline Image augment(const Image& img, const AugmentConfig& cfg, RngStream& rng) {
    Image out = img;
    if (rng.bernoulli(cfg.flip_p)) out = detail::hflip(out);
    if (rng.bernoulli(cfg.grayscale_p)) out = detail::to_grayscale(out);
    if (rng.bernoulli(cfg.jitter_p)) {
        const double s = cfg.jitter_strength;
        const double b = rng.uniform(1.0 - s, 1.0 + s);
        const double c = rng.uniform(1.0 - s, 1.0 + s);
        const double sat = rng.uniform(1.0 - s, 1.0 + s);
        out = detail::color_jitter(out, b, c, sat);
    }
    if (rng.bernoulli(cfg.rotation_p)) {
        const double deg = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
        out = detail::affine(out, deg * M_PI / 180.0, 0.0, 0.0);
    }
    if (rng.bernoulli(cfg.translate_p)) {
        const double dy = rng.uniform(-cfg.translate_max_frac, cfg.translate_max_frac) *
                          static_cast<double>(img.height);
        const double dx = rng.uniform(-cfg.translate_max_frac, cfg.translate_max_frac) *
                          static_cast<double>(img.width);
        out = detail::affine(out, 0.0, dy, dx);
    }
    if (rng.bernoulli(cfg.blur_p))
        out = detail::gaussian_blur(out, rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi));
    return out;
}

}  // namespace vldg
