#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vldg/dataset.hpp"
#include "vldg/image_io.hpp"
#include "vldg/rng.hpp"
#include "vldg/tensor.hpp"

namespace vldg {

/// Knobs for the synthetic multi-domain task. Class signals and domain
/// shifts are mutually orthogonal patterns on a coarse grid, so a linear
/// read-out of the class is guaranteed when class_signal_strength dominates
/// noise_sigma.
struct SynthSpec {
    int n_domains = 3;
    int n_classes = 5;
    int samples_per_class = 40;
    int image_side = 32;
    double class_signal_strength = 1.0;
    double domain_shift_strength = 0.3;
    double noise_sigma = 0.1;
    int pattern_grid = 8;

    void validate() const {
        if (n_classes < 2) throw ConfigError("synth: n_classes must be >= 2");
        if (n_domains < 2) throw ConfigError("synth: n_domains must be >= 2");
        if (samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
        if (pattern_grid < 2) throw ConfigError("synth: pattern_grid must be >= 2");
        if (image_side < pattern_grid)
            throw ConfigError("synth: image_side must be >= pattern_grid");
        if (pattern_grid * pattern_grid < n_classes + n_domains)
            throw ConfigError("synth: pattern_grid^2 must cover n_classes + n_domains");
        if (class_signal_strength < 0.0 || domain_shift_strength < 0.0 || noise_sigma < 0.0)
            throw ConfigError("synth: strengths must be nonnegative");
    }
};

namespace detail {

/// Orthonormal rows via Gram-Schmidt over seeded Gaussian draws.
inline std::vector<std::vector<double>> orthonormal_patterns(int count, int dim,
                                                             RngStream& rng) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<size_t>(count));
    while (static_cast<int>(rows.size()) < count) {
        std::vector<double> v(static_cast<size_t>(dim));
        for (double& x : v) x = rng.normal();
        for (const auto& u : rows) {
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += v[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
            for (int i = 0; i < dim; ++i) v[static_cast<size_t>(i)] -= dot * u[static_cast<size_t>(i)];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& x : v) x /= norm;
        rows.push_back(std::move(v));
    }
    return rows;
}

}  // namespace detail

/// The grid patterns behind a synthetic task; exposed so tests can run the
/// template-matching oracle against generated data.
struct SynthPatterns {
    std::vector<std::vector<double>> class_pattern;
    std::vector<std::vector<double>> domain_pattern;
    int grid = 0;
};

inline SynthPatterns synth_patterns(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    RngStream rng = derive_rng(seed, "synth/patterns");
    const int dim = spec.pattern_grid * spec.pattern_grid;
    auto all = detail::orthonormal_patterns(spec.n_classes + spec.n_domains, dim, rng);
    SynthPatterns p;
    p.grid = spec.pattern_grid;
    p.class_pattern.assign(all.begin(), all.begin() + spec.n_classes);
    p.domain_pattern.assign(all.begin() + spec.n_classes, all.end());
    return p;
}

/// Pixel block for one sample: 0.5 + 0.5 * (s_c * P_y + s_d * Q_d + noise),
/// patterns nearest-upsampled from the coarse grid, same value per channel.
inline Image synth_image(const SynthSpec& spec, const SynthPatterns& pat, int domain,
                         int label, RngStream& noise_rng) {
    const size_t side = static_cast<size_t>(spec.image_side);
    const size_t grid = static_cast<size_t>(pat.grid);
    Image img(3, side, side);
    for (size_t y = 0; y < side; ++y)
        for (size_t x = 0; x < side; ++x) {
            const size_t gy = y * grid / side;
            const size_t gx = x * grid / side;
            const size_t g = gy * grid + gx;
            double signal =
                spec.class_signal_strength * pat.class_pattern[static_cast<size_t>(label)][g] +
                spec.domain_shift_strength * pat.domain_pattern[static_cast<size_t>(domain)][g];
            if (spec.noise_sigma > 0.0) signal += noise_rng.normal(0.0, spec.noise_sigma);
            const double v = 0.5 + 0.5 * signal;
            for (size_t c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
    return img;
}

inline std::string synth_domain_name(int d) { return "synth" + std::to_string(d); }

/// Generate all domains in memory (exact doubles, no quantization).
inline std::vector<DomainDataset> synth_domains(const SynthSpec& spec, std::uint64_t seed,
                                                std::shared_ptr<AccessLog> log = nullptr) {
    spec.validate();
    const SynthPatterns pat = synth_patterns(spec, seed);
    std::vector<DomainDataset> out;
    for (int d = 0; d < spec.n_domains; ++d) {
        RngStream noise = derive_rng(seed, "synth/noise/" + std::to_string(d));
        std::vector<Sample> samples;
        for (int c = 0; c < spec.n_classes; ++c)
            for (int i = 0; i < spec.samples_per_class; ++i) {
                Sample s;
                s.id = "c" + std::to_string(c) + "_i" + std::to_string(i) + ".png";
                s.label = c;
                s.image = synth_image(spec, pat, d, c, noise);
                s.image.domain = synth_domain_name(d);
                s.image.sample_id = s.id;
                samples.push_back(std::move(s));
            }
        out.emplace_back(synth_domain_name(d), std::move(samples), log);
    }
    return out;
}

/// Write the same generation to disk in the standard dataset layout
/// (<root>/<domain>/labels.csv plus PNGs), so loaders exercise the real
/// path. PNG quantizes to 8 bits; keep signal strengths comfortably above
/// 1/255.
inline void materialize_synth(const SynthSpec& spec, std::uint64_t seed,
                              const std::string& out_root) {
    namespace fs = std::filesystem;
    spec.validate();
    const SynthPatterns pat = synth_patterns(spec, seed);
    for (int d = 0; d < spec.n_domains; ++d) {
        RngStream noise = derive_rng(seed, "synth/noise/" + std::to_string(d));
        const fs::path dir = fs::path(out_root) / synth_domain_name(d);
        fs::create_directories(dir);
        std::ofstream manifest(dir / "labels.csv");
        if (!manifest) throw DataError("cannot write " + (dir / "labels.csv").string());
        manifest << "path,label\n";
        for (int c = 0; c < spec.n_classes; ++c)
            for (int i = 0; i < spec.samples_per_class; ++i) {
                const std::string name =
                    "c" + std::to_string(c) + "_i" + std::to_string(i) + ".png";
                Image img = synth_image(spec, pat, d, c, noise);
                write_png((dir / name).string(), img);
                manifest << name << "," << c << "\n";
            }
    }
}

/// Nearest-class-template accuracy: the closed-form oracle the generator
/// guarantees. Scores each image against every class pattern.
inline double template_match_accuracy(const SynthSpec& spec, const SynthPatterns& pat,
                                      const DomainDataset& d) {
    const size_t side = static_cast<size_t>(spec.image_side);
    const size_t grid = static_cast<size_t>(pat.grid);
    size_t hits = 0;
    for (size_t i = 0; i < d.size(); ++i) {
        const Image& img = d.image(i);
        std::vector<double> cell(grid * grid, 0.0);
        std::vector<double> cnt(grid * grid, 0.0);
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x) {
                const size_t g = (y * grid / side) * grid + (x * grid / side);
                cell[g] += img.at(0, y, x) - 0.5;
                cnt[g] += 1.0;
            }
        for (size_t g = 0; g < cell.size(); ++g) cell[g] /= cnt[g];
        int best = 0;
        double best_score = -1e300;
        for (int c = 0; c < spec.n_classes; ++c) {
            double s = 0.0;
            for (size_t g = 0; g < cell.size(); ++g)
                s += cell[g] * pat.class_pattern[static_cast<size_t>(c)][g];
            if (s > best_score) {
                best_score = s;
                best = c;
            }
        }
        if (best == d.label(i)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(d.size());
}

}  // namespace vldg
