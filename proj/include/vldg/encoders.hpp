#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vldg/autodiff.hpp"
#include "vldg/image.hpp"
#include "vldg/rng.hpp"
#include "vldg/serialize.hpp"
#include "vldg/tokenizer.hpp"

namespace vldg {

struct EncoderDims {
    size_t d_i = 64;        // intermediate visual width
    size_t c_f = 32;        // shared feature width
    size_t d_t = 16;        // text token embedding width
    size_t l_max = 16;      // context length
    size_t image_side = 32;
    size_t patch_grid = 8;
    size_t channels = 3;

    size_t pooled_features() const { return channels * patch_grid * patch_grid; }
};

/// Average pixels over a patch_grid x patch_grid cell decomposition, per
/// channel. Pure preprocessing; gradients never flow into pixels.
inline Tensor pool_images(const std::vector<Image>& images, const EncoderDims& dims) {
    if (images.empty()) throw Error("pool_images: empty batch");
    const size_t g = dims.patch_grid;
    Tensor out({images.size(), dims.pooled_features()});
    for (size_t n = 0; n < images.size(); ++n) {
        const Image& img = images[n];
        if (img.height != dims.image_side || img.width != dims.image_side ||
            img.channels != dims.channels)
            throw Error("pool_images: image " + std::to_string(n) + " is " +
                        std::to_string(img.channels) + "x" + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + ", bundle expects " +
                        std::to_string(dims.channels) + "x" + std::to_string(dims.image_side) +
                        "x" + std::to_string(dims.image_side));
        std::vector<double> cnt(dims.pooled_features(), 0.0);
        for (size_t c = 0; c < img.channels; ++c)
            for (size_t y = 0; y < img.height; ++y)
                for (size_t x = 0; x < img.width; ++x) {
                    const size_t f = (c * g + y * g / img.height) * g + x * g / img.width;
                    out(n, f) += img.at(c, y, x);
                    cnt[f] += 1.0;
                }
        for (size_t f = 0; f < cnt.size(); ++f) out(n, f) /= cnt[f];
    }
    return out;
}

/// Linear f_I over pooled patches: features = pooled * W + b.
struct VisionEncoder {
    Param w, b;

    VisionEncoder(const EncoderDims& dims, RngStream& init)
        : w("vision.w", Tensor::randn({dims.pooled_features(), dims.d_i}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.pooled_features())))),
          b("vision.b", Tensor::zeros({dims.d_i})) {}

    Var forward(Tape& t, Var pooled) {
        return add_rowvec(matmul(pooled, t.leaf(w)), t.leaf(b));
    }

    void set_trainable(bool v) { w.trainable = b.trainable = v; }
    std::vector<Param*> params() { return {&w, &b}; }
};

/// Linear p: R^{d_i} -> R^{c_f}.
struct Projector {
    Param w, b;

    Projector(const EncoderDims& dims, RngStream& init)
        : w("projector.w", Tensor::randn({dims.d_i, dims.c_f}, init,
                                         1.0 / std::sqrt(static_cast<double>(dims.d_i)))),
          b("projector.b", Tensor::zeros({dims.c_f})) {}

    Var forward(Tape& t, Var feats) {
        return add_rowvec(matmul(feats, t.leaf(w)), t.leaf(b));
    }

    void set_trainable(bool v) { w.trainable = b.trainable = v; }
    std::vector<Param*> params() { return {&w, &b}; }
};

enum class TextMode { Bag, Attn };

inline std::string text_mode_name(TextMode m) { return m == TextMode::Bag ? "bag" : "attn"; }

inline TextMode text_mode_from_name(const std::string& s) {
    if (s == "bag") return TextMode::Bag;
    if (s == "attn") return TextMode::Attn;
    throw ConfigError("unknown text mode \"" + s + "\" (expected bag or attn)");
}

/// Toy text encoder. Bag mode sums token embeddings; attn mode runs one
/// self-attention block with a residual and pools at the end-of-text
/// position. Injected embedding rows join the sequence before attention, so
/// they genuinely interact with the frozen tokens.
struct TextEncoder {
    TextMode mode;
    size_t l_max;
    size_t d_t;
    bool use_positions = true;
    Param emb, pos, wq, wk, wv, wo, wt, bt;

    TextEncoder(size_t vocab, const EncoderDims& dims, TextMode m, RngStream& init)
        : mode(m),
          l_max(dims.l_max),
          d_t(dims.d_t),
          emb("text.emb", Tensor::randn({vocab, dims.d_t}, init,
                                        1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          pos("text.pos", Tensor::randn({dims.l_max, dims.d_t}, init, 0.01)),
          wq("text.wq", Tensor::randn({dims.d_t, dims.d_t}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          wk("text.wk", Tensor::randn({dims.d_t, dims.d_t}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          wv("text.wv", Tensor::randn({dims.d_t, dims.d_t}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          wo("text.wo", Tensor::randn({dims.d_t, dims.d_t}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          wt("text.wt", Tensor::randn({dims.d_t, dims.c_f}, init,
                                      1.0 / std::sqrt(static_cast<double>(dims.d_t)))),
          bt("text.bt", Tensor::zeros({dims.c_f})) {}

    /// Un-normalized 1 x c_f feature for one framed sequence, with optional
    /// injected rows placed at injection_point (default: just before eot).
    Var feature_row(Tape& t, const std::vector<int>& ids, std::optional<Var> injected,
                    std::optional<size_t> injection_point = std::nullopt) {
        if (ids.size() < 2) throw Error("text: sequence must be framed by sot/eot");
        const size_t n_inj = injected ? injected->value().rows() : 0;
        const size_t len = ids.size() + n_inj;
        if (len > l_max)
            throw Error("context overflow: sequence length " + std::to_string(len) +
                        " exceeds L_max " + std::to_string(l_max));
        if (injected && injected->value().cols() != d_t)
            throw Error("text: injected rows must be width d_t");
        const size_t point = injection_point.value_or(ids.size() - 1);
        if (point < 1 || point > ids.size() - 1)
            throw Error("text: injection point out of range");

        Var table = t.leaf(emb);
        Var seq = [&] {
            if (n_inj == 0 && !injected)
                return gather_rows(table, ids);
            std::vector<int> front(ids.begin(), ids.begin() + static_cast<long>(point));
            std::vector<int> back(ids.begin() + static_cast<long>(point), ids.end());
            return concat_rows({gather_rows(table, front), *injected, gather_rows(table, back)});
        }();
        if (use_positions) seq = add(seq, slice_rows(t.leaf(pos), 0, len));

        Var pooled = [&] {
            if (mode == TextMode::Bag) {
                Var ones = t.constant(Tensor::full({1, len}, 1.0));
                return matmul(ones, seq);
            }
            Var q = matmul(seq, t.leaf(wq));
            Var k = matmul(seq, t.leaf(wk));
            Var v = matmul(seq, t.leaf(wv));
            Var attn = softmax_rows(scale(matmul(q, transpose(k)),
                                          1.0 / std::sqrt(static_cast<double>(d_t))));
            Var out = add(matmul(matmul(attn, v), t.leaf(wo)), seq);
            return slice_rows(out, len - 1, 1);
        }();
        return add_rowvec(matmul(pooled, t.leaf(wt)), t.leaf(bt));
    }

    void set_trainable(bool v) {
        for (Param* p : params()) p->trainable = v;
    }

    std::vector<Param*> params() {
        if (mode == TextMode::Bag) return {&emb, &pos, &wt, &bt};
        return {&emb, &pos, &wq, &wk, &wv, &wo, &wt, &bt};
    }
};

/// The full model container: f_v = p . f_I on the vision side, tokenizer +
/// f_t on the text side, shared feature width c_f.
struct EncoderBundle {
    EncoderDims dims;
    Tokenizer tokenizer;
    VisionEncoder vision;
    Projector projector;
    TextEncoder text;
    std::string source = "toy";

    EncoderBundle(EncoderDims d, std::vector<std::string> vocab_words, TextMode mode,
                  RngStream init)
        : dims(d),
          tokenizer(std::move(vocab_words)),
          vision(d, init),
          projector(d, init),
          text(tokenizer.vocab_size(), d, mode, init) {}

    std::vector<Param*> vision_params() { return vision.params(); }
    std::vector<Param*> projector_params() { return projector.params(); }
    std::vector<Param*> text_params() { return text.params(); }

    std::vector<Param*> all_params() {
        std::vector<Param*> out = vision.params();
        for (Param* p : projector.params()) out.push_back(p);
        for (Param* p : text.params()) out.push_back(p);
        return out;
    }

    std::uint64_t hash_params(const std::vector<Param*>& ps) const {
        std::uint64_t h = 1469598103934665603ull;
        for (const Param* p : ps) {
            h ^= tensor_bits_hash(p->value);
            h *= 1099511628211ull;
        }
        return h;
    }

    std::uint64_t text_hash() { return hash_params(text.params()); }
    std::uint64_t vision_hash() { return hash_params(vision.params()); }
    std::uint64_t backbone_hash() {
        auto ps = vision.params();
        for (Param* p : projector.params()) ps.push_back(p);
        return hash_params(ps);
    }
};

inline EncoderBundle build_toy_bundle(const EncoderDims& dims, std::uint64_t seed,
                                      TextMode mode = TextMode::Attn,
                                      std::vector<std::string> vocab = default_vocab()) {
    return EncoderBundle(dims, std::move(vocab), mode, derive_rng(seed, "encoder/init"));
}

/// V = normalize_rows(p(f_I(images))), one row per image.
inline Var encode_image_intermediate(EncoderBundle& bundle, Tape& t,
                                     const std::vector<Image>& images) {
    return bundle.vision.forward(t, t.constant(pool_images(images, bundle.dims)));
}

inline Var encode_image(EncoderBundle& bundle, Tape& t, const std::vector<Image>& images) {
    return row_normalize(bundle.projector.forward(t, encode_image_intermediate(bundle, t, images)));
}

inline Tensor encode_image_values(EncoderBundle& bundle, const std::vector<Image>& images) {
    Tape t;
    return encode_image(bundle, t, images).value();
}

/// T = row-normalized features of framed token sequences.
inline Var encode_text(EncoderBundle& bundle, Tape& t,
                       const std::vector<std::vector<int>>& sequences) {
    if (sequences.empty()) throw Error("encode_text: no sequences");
    std::vector<Var> rows;
    rows.reserve(sequences.size());
    for (const auto& ids : sequences)
        rows.push_back(bundle.text.feature_row(t, ids, std::nullopt));
    return row_normalize(concat_rows(rows));
}

inline Tensor encode_text_values(EncoderBundle& bundle,
                                 const std::vector<std::vector<int>>& sequences) {
    Tape t;
    return encode_text(bundle, t, sequences).value();
}

/// Single-sequence encode with injected embedding rows; un-normalized here
/// because callers batch rows first, then normalize the matrix.
inline Var encode_text_with_injected_embeddings(EncoderBundle& bundle, Tape& t,
                                                const std::vector<int>& ids, Var injected,
                                                std::optional<size_t> injection_point =
                                                    std::nullopt) {
    return bundle.text.feature_row(t, ids, injected, injection_point);
}

inline Json bundle_to_json(EncoderBundle& b, const std::vector<std::string>& vocab_words) {
    Json params = Json::object();
    for (Param* p : b.all_params()) params[p->name] = param_to_json(*p);
    return Json{{"format", "vldg-bundle-v1"},
                {"dims",
                 {{"d_i", b.dims.d_i},
                  {"c_f", b.dims.c_f},
                  {"d_t", b.dims.d_t},
                  {"l_max", b.dims.l_max},
                  {"image_side", b.dims.image_side},
                  {"patch_grid", b.dims.patch_grid},
                  {"channels", b.dims.channels}}},
                {"text_mode", text_mode_name(b.text.mode)},
                {"use_positions", b.text.use_positions},
                {"vocab", vocab_words},
                {"params", params}};
}

inline void save_bundle(EncoderBundle& b, const std::vector<std::string>& vocab_words,
                        const std::string& path) {
    write_json_file_atomic(path, bundle_to_json(b, vocab_words));
}

/// Load weights saved by save_bundle. The same interface would wrap real
/// pretrained weights; dimension consistency is enforced either way.
inline EncoderBundle load_pretrained_bundle(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw DataError("missing weights file: " + path +
                        " (expected a vldg-bundle-v1 JSON container)");
    Json j = read_json_file(path);
    if (!j.is_object() || j.value("format", "") != std::string("vldg-bundle-v1"))
        throw DataError("weights file " + path + " is not a vldg-bundle-v1 container");
    EncoderDims dims;
    const Json& d = j.at("dims");
    dims.d_i = d.at("d_i").get<size_t>();
    dims.c_f = d.at("c_f").get<size_t>();
    dims.d_t = d.at("d_t").get<size_t>();
    dims.l_max = d.at("l_max").get<size_t>();
    dims.image_side = d.at("image_side").get<size_t>();
    dims.patch_grid = d.at("patch_grid").get<size_t>();
    dims.channels = d.at("channels").get<size_t>();
    auto vocab = j.at("vocab").get<std::vector<std::string>>();
    EncoderBundle b(dims, vocab, text_mode_from_name(j.at("text_mode").get<std::string>()),
                    derive_rng(0, "encoder/init"));
    b.text.use_positions = j.value("use_positions", true);
    b.source = path;
    const Json& params = j.at("params");
    for (Param* p : b.all_params()) {
        if (!params.contains(p->name))
            throw DataError("weights file " + path + " lacks tensor \"" + p->name + "\"");
        try {
            param_from_json(params.at(p->name), *p);
        } catch (const Error& e) {
            throw DataError("weights file " + path + ": " + e.what() +
                            " (projection mismatch requires an explicit projector)");
        }
    }
    return b;
}

}  // namespace vldg
