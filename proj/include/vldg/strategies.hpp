#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vldg/encoders.hpp"
#include "vldg/losses.hpp"
#include "vldg/optim.hpp"
#include "vldg/prompts.hpp"

namespace vldg {

enum class Strategy { Erm, LinearProbe, ZeroShot, NaiveMm, CoopLvt };

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Erm: return "erm";
        case Strategy::LinearProbe: return "linear_probe";
        case Strategy::ZeroShot: return "zero_shot";
        case Strategy::NaiveMm: return "naive_mm";
        case Strategy::CoopLvt: return "cooplvt";
    }
    throw Error("unreachable strategy");
}

inline Strategy strategy_from_name(const std::string& s) {
    if (s == "erm") return Strategy::Erm;
    if (s == "linear_probe") return Strategy::LinearProbe;
    if (s == "zero_shot") return Strategy::ZeroShot;
    if (s == "naive_mm") return Strategy::NaiveMm;
    if (s == "cooplvt") return Strategy::CoopLvt;
    throw ConfigError("unknown strategy \"" + s +
                      "\" (expected erm, linear_probe, zero_shot, naive_mm, or cooplvt)");
}

/// Linear classifier w: R^{c_f} -> R^K.
struct ClassifierHead {
    Param w, b;

    ClassifierHead(size_t c_f, int k, RngStream& init)
        : w("head.w", Tensor::randn({c_f, static_cast<size_t>(k)}, init,
                                    1.0 / std::sqrt(static_cast<double>(c_f)))),
          b("head.b", Tensor::zeros({static_cast<size_t>(k)})) {}

    Var forward(Tape& t, Var feats) {
        return add_rowvec(matmul(feats, t.leaf(w)), t.leaf(b));
    }

    int k() const { return static_cast<int>(w.value.cols()); }
    std::vector<Param*> params() { return {&w, &b}; }
    void set_trainable(bool v) { w.trainable = b.trainable = v; }
};

/// Learnable temperature, stored as log scale. exp(s) multiplies cosine
/// similarities and is clamped to [1, 100] after every optimizer step. A
/// fixed scale reproduces the bare-softmax reading of the loss.
struct LogitScale {
    Param s;

    explicit LogitScale(double init_scale = 14.3, bool learnable = true)
        : s("logit_scale.s", Tensor::scalar(std::log(init_scale))) {
        if (init_scale < 1.0 || init_scale > 100.0)
            throw ConfigError("logit scale init must lie in [1, 100]");
        s.trainable = learnable;
    }

    Var scale_exp(Tape& t) { return exp(t.leaf(s)); }
    double value() const { return std::exp(s.value[0]); }

    void clamp() {
        s.value[0] = std::clamp(s.value[0], std::log(1.0), std::log(100.0));
    }
};

/// The visual conditioner G: R^{d_i} -> R^{n_p * d_t}, an MLP with hidden
/// width d_i, tanh between layers, small uniform weights, and a zero-init
/// final bias so injected tokens start near zero.
class Conditioner {
public:
    Conditioner(size_t d_i, int n_p, size_t d_t, int mlp_layers, RngStream& init)
        : n_p_(n_p), d_t_(d_t) {
        if (n_p < 0) throw ConfigError("conditioner: n_p must be nonnegative");
        if (mlp_layers < 1) throw ConfigError("conditioner: mlp_layers must be >= 1");
        const size_t d_out = static_cast<size_t>(n_p) * d_t;
        for (int l = 0; l < mlp_layers; ++l) {
            const size_t in = d_i;
            const size_t out = (l == mlp_layers - 1) ? d_out : d_i;
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            Tensor w({in, out});
            for (size_t i = 0; i < w.numel(); ++i) w[i] = init.uniform(-bound, bound);
            weights_.emplace_back("conditioner.w" + std::to_string(l), std::move(w));
            biases_.emplace_back("conditioner.b" + std::to_string(l), Tensor::zeros({out}));
        }
    }

    int n_p() const { return n_p_; }
    size_t d_t() const { return d_t_; }

    /// B x (n_p * d_t), before the per-sample reshape.
    Var forward(Tape& t, Var feats) {
        Var h = feats;
        for (size_t l = 0; l < weights_.size(); ++l) {
            h = add_rowvec(matmul(h, t.leaf(weights_[l])), t.leaf(biases_[l]));
            if (l + 1 < weights_.size()) h = tanh(h);
        }
        return h;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (Param& p : weights_) out.push_back(&p);
        for (Param& p : biases_) out.push_back(&p);
        return out;
    }

    void set_trainable(bool v) {
        for (Param* p : params()) p->trainable = v;
    }

    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (const Param& p : weights_) {
            h ^= tensor_bits_hash(p.value);
            h *= 1099511628211ull;
        }
        for (const Param& p : biases_) {
            h ^= tensor_bits_hash(p.value);
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    int n_p_;
    size_t d_t_;
    std::vector<Param> weights_;
    std::vector<Param> biases_;
};

/// Row-major reshape of one conditioned row into n_p injected token
/// embeddings of width d_t.
inline Var condition_tokens_row(Conditioner& g, Tape& t, Var cond_all, size_t row) {
    return reshape(slice_rows(cond_all, row, 1),
                   {static_cast<size_t>(g.n_p()), g.d_t()});
}

/// Fixed class-prompt features: K row-normalized rows, no gradient.
inline Tensor prompt_features(EncoderBundle& bundle, const PromptSet& ps) {
    return encode_text_values(bundle, ps.token_sequences);
}

struct StepResult {
    double loss = 0.0;
};

/// One ERM step: cross entropy of the head over pooled-source images.
inline StepResult erm_step(EncoderBundle& bundle, ClassifierHead& head,
                           const std::vector<Image>& images, const std::vector<int>& labels,
                           AdamW& opt) {
    Tape t;
    Var v = encode_image(bundle, t, images);
    Var loss = ce_loss(head.forward(t, v), labels);
    t.backward(loss);
    std::vector<Param*> params = bundle.vision_params();
    for (Param* p : bundle.projector_params()) params.push_back(p);
    for (Param* p : head.params()) params.push_back(p);
    opt.step(params);
    return {loss.value()[0]};
}

/// One probing step: identical loss, but the backbone must be frozen and
/// only the head may move.
inline StepResult linear_probe_step(EncoderBundle& bundle, ClassifierHead& head,
                                    const std::vector<Image>& images,
                                    const std::vector<int>& labels, AdamW& opt) {
    for (Param* p : bundle.vision_params())
        if (p->trainable)
            throw ConfigError("linear probing requires a frozen backbone (" + p->name +
                              " is trainable)");
    for (Param* p : bundle.projector_params())
        if (p->trainable)
            throw ConfigError("linear probing requires a frozen backbone (" + p->name +
                              " is trainable)");
    Tape t;
    Var v = encode_image(bundle, t, images);
    Var loss = ce_loss(head.forward(t, v), labels);
    t.backward(loss);
    opt.step(head.params());
    return {loss.value()[0]};
}

/// One naive multi-modal step against fixed class-prompt features.
inline StepResult naive_mm_step(EncoderBundle& bundle, const Tensor& t_classes,
                                LogitScale& scale, const std::vector<Image>& images,
                                const std::vector<int>& labels, AdamW& opt) {
    Tape t;
    Var v = encode_image(bundle, t, images);
    Var loss = naive_mm_loss(v, t.constant(t_classes), labels, scale.scale_exp(t));
    t.backward(loss);
    std::vector<Param*> params = bundle.vision_params();
    for (Param* p : bundle.projector_params()) params.push_back(p);
    params.push_back(&scale.s);
    opt.step(params);
    scale.clamp();
    return {loss.value()[0]};
}

/// Per-sample conditioned text features for a labeled batch: row j is
/// f_t([S[y_j], G(f_I(x_j))]), all rows normalized together.
inline Var conditioned_text_features_train(EncoderBundle& bundle, Conditioner& g, Tape& t,
                                           const PromptSet& ps, Var f_i,
                                           const std::vector<int>& labels) {
    Var cond = g.forward(t, f_i);
    std::vector<Var> rows;
    rows.reserve(labels.size());
    for (size_t j = 0; j < labels.size(); ++j) {
        Var tokens = condition_tokens_row(g, t, cond, j);
        rows.push_back(encode_text_with_injected_embeddings(
            bundle, t, prompt_tokens_for_label(ps, labels[j]), tokens));
    }
    return row_normalize(concat_rows(rows));
}

/// One CoOpLVT step: symmetric contrastive loss between visual features and
/// image-conditioned text features. Text encoder weights stay frozen.
inline StepResult cooplvt_train_step(EncoderBundle& bundle, Conditioner& g,
                                     const PromptSet& ps, LogitScale& scale,
                                     const std::vector<Image>& images,
                                     const std::vector<int>& labels, AdamW& opt) {
    Tape t;
    Var pooled = t.constant(pool_images(images, bundle.dims));
    Var f_i = bundle.vision.forward(t, pooled);
    Var v = row_normalize(bundle.projector.forward(t, f_i));
    Var t_batch = conditioned_text_features_train(bundle, g, t, ps, f_i, labels);
    Var loss = cooplvt_contrastive_loss(v, t_batch, scale.scale_exp(t));
    t.backward(loss);
    std::vector<Param*> params = bundle.vision_params();
    for (Param* p : bundle.projector_params()) params.push_back(p);
    for (Param* p : bundle.text_params()) params.push_back(p);
    for (Param* p : g.params()) params.push_back(p);
    params.push_back(&scale.s);
    opt.step(params);
    scale.clamp();
    return {loss.value()[0]};
}

/// Test-time rule: condition on the test image, enumerate every class
/// template, score by similarity. Ties go to the lowest class index.
inline std::pair<int, std::vector<double>> cooplvt_infer(EncoderBundle& bundle, Conditioner& g,
                                                         const PromptSet& ps,
                                                         const Image& image) {
    Tape t;
    Var pooled = t.constant(pool_images({image}, bundle.dims));
    Var f_i = bundle.vision.forward(t, pooled);
    Var v = row_normalize(bundle.projector.forward(t, f_i));
    Var cond = g.forward(t, f_i);
    Var tokens = condition_tokens_row(g, t, cond, 0);
    std::vector<Var> rows;
    for (size_t k = 0; k < ps.k(); ++k)
        rows.push_back(encode_text_with_injected_embeddings(
            bundle, t, ps.token_sequences[k], tokens));
    Var t_all = row_normalize(concat_rows(rows));
    Tensor sim = matmul(v.value(), transpose(t_all.value()));
    std::vector<double> scores(sim.cols());
    int best = 0;
    for (size_t k = 0; k < sim.cols(); ++k) {
        scores[k] = sim(0, k);
        if (scores[k] > scores[static_cast<size_t>(best)]) best = static_cast<int>(k);
    }
    return {best, scores};
}

}  // namespace vldg
