// Acceptance gate for the shipped library: ten numbered contracts, one
// PASS/FAIL line each, exit code = number of failures. Tolerances and
// runtime budgets are pinned as constants next to the checks that use
// them.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vldg/config.hpp"
#include "vldg/losses.hpp"
#include "vldg/protocol.hpp"
#include "vldg/sampler.hpp"
#include "vldg/strategies.hpp"
#include "vldg/synth.hpp"

using namespace vldg;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kTargetF1Floor = 0.8;
constexpr double kOracleBudgetSec = 5.0;
constexpr double kGradBudgetSec = 60.0;
constexpr double kEndToEndBudgetSec = 600.0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

EncoderDims tiny_dims() { return EncoderDims{24, 12, 10, 16, 16, 4, 3}; }

SynthSpec four_domain_spec(double shift) {
    SynthSpec spec;
    spec.n_domains = 4;
    spec.n_classes = 4;
    spec.samples_per_class = 20;
    spec.image_side = 16;
    spec.pattern_grid = 4;
    spec.class_signal_strength = 1.2;
    spec.domain_shift_strength = shift;
    spec.noise_sigma = 0.05;
    return spec;
}

ExperimentConfig desk_config(Strategy s, double lr) {
    ExperimentConfig cfg;
    cfg.strategy = s;
    cfg.lr = lr;
    cfg.b = 8;
    cfg.steps = 300;
    cfg.eval_interval = 50;
    cfg.val_fraction = 0.2;
    cfg.trial_seeds = {0};
    cfg.prompt_family = PromptFamily::Custom;
    cfg.n_p = 4;
    cfg.mlp_layers = 2;
    cfg.encoder.kind = "toy";
    cfg.encoder.seed = 7;
    cfg.encoder.dims = tiny_dims();
    cfg.data.synth = four_domain_spec(0.3);
    cfg.data.synth_seed = 11;
    cfg.data.augment_enabled = false;
    return cfg;
}

Image random_image(const EncoderDims& dims, RngStream& r) {
    Image img(dims.channels, dims.image_side, dims.image_side);
    for (double& v : img.pixels) v = r.uniform();
    return img;
}

std::vector<std::string> synth_class_names(int k) {
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
    return names;
}

// 1. Closed-form loss values plus agreement with independent double-loop
//    softmax oracles on random instances.
bool criterion_loss_oracles(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    {
        Tape t;
        const double ce = ce_loss(t.constant(Tensor::zeros({4, 5})), {0, 1, 2, 3}).value()[0];
        ok &= close(ce, std::log(5.0), kOracleTol);
    }
    {
        Tape t;
        const double contrastive =
            cooplvt_contrastive_loss(t.constant(Tensor::zeros({4, 6})),
                                     t.constant(Tensor::zeros({4, 6})),
                                     t.constant_scalar(1.0))
                .value()[0];
        ok &= close(contrastive, 2.0 * std::log(4.0), kOracleTol);
    }

    RngStream r(401);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t b = 2 + r.next_below(7);
        const size_t k = 2 + r.next_below(5);
        Tensor logits({b, k});
        for (size_t i = 0; i < logits.numel(); ++i) logits[i] = 3.0 * r.normal();
        std::vector<int> labels;
        for (size_t i = 0; i < b; ++i)
            labels.push_back(static_cast<int>(r.next_below(k)));

        double expect = 0.0;
        for (size_t i = 0; i < b; ++i) {
            double denom = 0.0;
            for (size_t j = 0; j < k; ++j) denom += std::exp(logits(i, j));
            expect -= std::log(std::exp(logits(i, static_cast<size_t>(labels[i]))) / denom);
        }
        expect /= static_cast<double>(b);

        Tape t;
        ok &= close(ce_loss(t.constant(logits), labels).value()[0], expect, kOracleTol);
    }

    for (int trial = 0; trial < 200; ++trial) {
        const size_t b = 2 + r.next_below(7);
        const size_t d = 2 + r.next_below(9);
        const double scale = 0.5 + 3.5 * r.uniform();
        Tensor v({b, d}), tb({b, d});
        for (size_t i = 0; i < v.numel(); ++i) v[i] = r.normal();
        for (size_t i = 0; i < tb.numel(); ++i) tb[i] = r.normal();

        std::vector<std::vector<double>> m(b, std::vector<double>(b, 0.0));
        for (size_t i = 0; i < b; ++i)
            for (size_t j = 0; j < b; ++j) {
                double dot = 0.0;
                for (size_t f = 0; f < d; ++f) dot += v(i, f) * tb(j, f);
                m[i][j] = scale * dot;
            }
        double text_dir = 0.0, visual_dir = 0.0;
        for (size_t i = 0; i < b; ++i) {
            double denom_row = 0.0, denom_col = 0.0;
            for (size_t j = 0; j < b; ++j) {
                denom_row += std::exp(m[i][j]);
                denom_col += std::exp(m[j][i]);
            }
            text_dir -= std::log(std::exp(m[i][i]) / denom_row);
            visual_dir -= std::log(std::exp(m[i][i]) / denom_col);
        }
        const double expect = (text_dir + visual_dir) / static_cast<double>(b);

        Tape t;
        const double got = cooplvt_contrastive_loss(t.constant(v), t.constant(tb),
                                                    t.constant_scalar(scale))
                               .value()[0];
        ok &= close(got, expect, kOracleTol);
    }

    const double secs = seconds_since(t0);
    ok &= secs < kOracleBudgetSec;
    char buf[96];
    std::snprintf(buf, sizeof buf, "400 random trials, %.2f s", secs);
    detail = buf;
    return ok;
}

// 2. Analytic gradients of both training losses, taken through the full
//    image chain (and, for the contrastive path, through token injection
//    and the conditioner), against central finite differences.
bool criterion_gradients(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const EncoderDims dims = tiny_dims();
    EncoderBundle bundle = build_toy_bundle(dims, 17);
    RngStream r(2);
    std::vector<Image> images;
    for (int i = 0; i < 3; ++i) images.push_back(random_image(dims, r));
    const std::vector<int> labels = {0, 2, 1};
    PromptSet ps = build_prompt_set(PromptFamily::Custom, synth_class_names(3),
                                    bundle.tokenizer);
    LogitScale scale(14.3);

    auto fd_check = [](const std::vector<Param*>& params, auto make_loss, std::uint64_t pick,
                       int coords) {
        std::vector<Tensor> analytic;
        {
            Tape t;
            Var loss = make_loss(t);
            t.backward(loss);
            for (Param* p : params)
                analytic.push_back(p->grad.numel() ? p->grad
                                                   : Tensor::zeros(p->value.shape()));
            for (Param* p : params) p->zero_grad();
        }
        auto eval = [&]() {
            Tape t;
            return make_loss(t).value()[0];
        };
        RngStream pr(pick);
        double max_rel = 0.0;
        int checked = 0;
        const double h = 1e-5;
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Param& p = *params[pi];
            for (int c = 0; c < coords; ++c) {
                const size_t i = pr.next_below(p.value.numel());
                const double saved = p.value[i];
                p.value[i] = saved + h;
                const double up = eval();
                p.value[i] = saved - h;
                const double dn = eval();
                p.value[i] = saved;
                const double fd = (up - dn) / (2.0 * h);
                const double g = analytic[pi][i];
                const double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
                max_rel = std::max(max_rel, std::abs(fd - g) / denom);
                ++checked;
            }
            for (Param* q : params) q->zero_grad();
        }
        return std::pair<double, int>{max_rel, checked};
    };

    const Tensor t_classes = prompt_features(bundle, ps);
    auto naive_chain = [&](Tape& t) {
        Var v = encode_image(bundle, t, images);
        return naive_mm_loss(v, t.constant(t_classes), labels, scale.scale_exp(t));
    };
    std::vector<Param*> naive_params = bundle.vision_params();
    for (Param* p : bundle.projector_params()) naive_params.push_back(p);
    naive_params.push_back(&scale.s);
    auto [naive_err, naive_n] = fd_check(naive_params, naive_chain, 55, 4);

    RngStream ginit(77);
    Conditioner g(dims.d_i, 2, dims.d_t, 2, ginit);
    auto coop_chain = [&](Tape& t) {
        Var pooled = t.constant(pool_images(images, bundle.dims));
        Var f_i = bundle.vision.forward(t, pooled);
        Var v = row_normalize(bundle.projector.forward(t, f_i));
        Var t_batch = conditioned_text_features_train(bundle, g, t, ps, f_i, labels);
        return cooplvt_contrastive_loss(v, t_batch, scale.scale_exp(t));
    };
    std::vector<Param*> coop_params = bundle.vision_params();
    for (Param* p : bundle.projector_params()) coop_params.push_back(p);
    for (Param* p : g.params()) coop_params.push_back(p);
    coop_params.push_back(&scale.s);
    auto [coop_err, coop_n] = fd_check(coop_params, coop_chain, 56, 4);

    const double secs = seconds_since(t0);
    const bool ok = naive_err < kGradTol && coop_err < kGradTol &&
                    naive_n + coop_n >= 50 && secs < kGradBudgetSec;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d coords, max rel err %.2e, %.1f s", naive_n + coop_n,
                  std::max(naive_err, coop_err), secs);
    detail = buf;
    return ok;
}

// 3. Conditioned-token shape law and the injected-sequence length law;
//    context overflow must raise rather than truncate.
bool criterion_shapes(std::string& detail) {
    bool ok = true;
    RngStream r(33);
    Tokenizer tok(default_vocab(4));
    const std::vector<int> ids = tok.encode("a photo of a class0");
    const size_t template_len = ids.size();

    for (int trial = 0; trial < 20; ++trial) {
        const size_t d_i = 4 + r.next_below(29);
        const int n_p = 1 + static_cast<int>(r.next_below(6));
        const size_t d_t = 4 + r.next_below(13);
        const int layers = 1 + static_cast<int>(r.next_below(3));

        RngStream ginit = derive_rng(static_cast<std::uint64_t>(trial), "accept/cond");
        Conditioner g(d_i, n_p, d_t, layers, ginit);
        Tensor feats({3, d_i});
        for (size_t i = 0; i < feats.numel(); ++i) feats[i] = r.normal();

        Tape t;
        Var cond = g.forward(t, t.constant(feats));
        Var tokens = condition_tokens_row(g, t, cond, 1);
        ok &= tokens.value().rows() == static_cast<size_t>(n_p);
        ok &= tokens.value().cols() == d_t;

        EncoderDims dims;
        dims.d_t = d_t;
        dims.c_f = 6;
        dims.l_max = template_len + static_cast<size_t>(n_p);
        RngStream tinit = derive_rng(static_cast<std::uint64_t>(trial), "accept/text");
        TextEncoder text(tok.vocab_size(), dims, TextMode::Attn, tinit);

        // exact fit: the injected sequence occupies template_len + n_p rows
        Var row = text.feature_row(t, ids, tokens);
        ok &= row.value().rows() == 1 && row.value().cols() == dims.c_f;

        // one short: must throw, never truncate
        EncoderDims tight = dims;
        tight.l_max = template_len + static_cast<size_t>(n_p) - 1;
        RngStream tinit2 = derive_rng(static_cast<std::uint64_t>(trial), "accept/text2");
        TextEncoder cramped(tok.vocab_size(), tight, TextMode::Attn, tinit2);
        bool threw = false;
        try {
            Tape t2;
            Var cond2 = g.forward(t2, t2.constant(feats));
            cramped.feature_row(t2, ids, condition_tokens_row(g, t2, cond2, 1));
        } catch (const Error&) {
            threw = true;
        }
        ok &= threw;
    }
    detail = "20 random (d_i, n_p, d_t) triples";
    return ok;
}

// 4. Freezing contracts after 50 optimization steps, checked via bit
//    hashes of the frozen parameter groups.
bool criterion_freezing(std::string& detail) {
    bool ok = true;
    ExperimentConfig base = desk_config(Strategy::Erm, 0.01);
    base.steps = 50;
    std::vector<DomainDataset> domains = load_domains(base);
    const TaskLabels task = task_from_domains(domains);
    std::vector<const DomainDataset*> sources = {&domains[0], &domains[1], &domains[2]};

    auto run_fifty = [&](Strategy s, double lr) {
        ExperimentConfig cfg = desk_config(s, lr);
        Model m = build_model(cfg, task, 0);
        AdamW opt({.lr = lr});
        DgBatchStream stream(sources, cfg.b, 0, [&](const Image& img, RngStream&) {
            return eval_transform(img, m.bundle.dims, m.stats);
        });
        for (int step = 0; step < 50; ++step) {
            DgBatch batch = stream.next();
            m.train_step(batch.images, batch.labels, opt);
        }
        return m;
    };

    {
        ExperimentConfig cfg = desk_config(Strategy::NaiveMm, 0.002);
        Model probe_before = build_model(cfg, task, 0);
        const std::uint64_t text_before = probe_before.bundle.text_hash();
        Model m = run_fifty(Strategy::NaiveMm, 0.002);
        ok &= m.bundle.text_hash() == text_before;
    }
    {
        ExperimentConfig cfg = desk_config(Strategy::CoopLvt, 0.002);
        Model probe_before = build_model(cfg, task, 0);
        const std::uint64_t text_before = probe_before.bundle.text_hash();
        Model m = run_fifty(Strategy::CoopLvt, 0.002);
        ok &= m.bundle.text_hash() == text_before;
    }
    {
        ExperimentConfig cfg = desk_config(Strategy::LinearProbe, 0.05);
        Model probe_before = build_model(cfg, task, 0);
        const std::uint64_t backbone_before = probe_before.bundle.backbone_hash();
        Model m = run_fifty(Strategy::LinearProbe, 0.05);
        ok &= m.bundle.backbone_hash() == backbone_before;
    }
    detail = "text hash under naive_mm and cooplvt, backbone hash under linear_probe";
    return ok;
}

// 5. Target-domain isolation on a 4-domain task: the access log shows zero
//    target reads during train/select phases, and every runner
//    configuration performs exactly d x |seeds| training runs.
bool criterion_isolation(std::string& detail) {
    bool ok = true;
    ExperimentConfig cfg = desk_config(Strategy::Erm, 0.01);
    cfg.steps = 20;
    cfg.eval_interval = 10;
    cfg.trial_seeds = {0, 1};

    std::vector<DomainDataset> base = load_domains(cfg);
    const TaskLabels task = task_from_domains(base);
    const size_t d = base.size();
    const size_t expected_runs = d * cfg.trial_seeds.size();

    for (size_t ti = 0; ti < d; ++ti) {
        for (std::uint64_t seed : cfg.trial_seeds) {
            detail::TrialDomains td = detail::clone_with_log(base);
            std::vector<DomainDataset> sources;
            for (size_t j = 0; j < d; ++j)
                if (j != ti) sources.push_back(td.all[j]);
            TrialResult trial = run_single_trial(cfg, task, sources, seed, *td.log, "accept");
            td.log->set_phase("test/accept");
            evaluate_model_on_domain(trial.model, td.all[ti]);

            const std::string& target = td.all[ti].name();
            ok &= td.log->count(target, "train") == 0;
            ok &= td.log->count(target, "select") == 0;
            ok &= td.log->count(target, "test") > 0;
            ok &= td.log->count(sources[0].name(), "train") > 0;
        }
    }

    for (int workers : {1, 3}) {
        ExperimentConfig w = cfg;
        w.output.workers = workers;
        MultiSourceResult res = run_multi_source(w);
        ok &= static_cast<size_t>(res.training_runs) == expected_runs;
        ok &= res.records.size() == expected_runs;
    }
    {
        ExperimentConfig w = cfg;
        w.output.workers = 2;
        MultiSourceResult res = run_single_source(w);
        ok &= static_cast<size_t>(res.training_runs) == expected_runs;
    }

    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu trials logged, %zu runs per configuration", expected_runs,
                  expected_runs);
    detail = buf;
    return ok;
}

// 6. Sampler law: every batch carries exactly b per source domain and
//    B = b x d_tr, with b = 32 over 3 sources giving 96.
bool criterion_sampler(std::string& detail) {
    bool ok = true;
    SynthSpec spec = four_domain_spec(0.3);
    spec.n_domains = 3;
    spec.samples_per_class = 10;
    std::vector<DomainDataset> domains = synth_domains(spec, 5);
    DgBatchStream stream({&domains[0], &domains[1], &domains[2]}, 32, 9);
    ok &= stream.total_batch() == 96;

    for (int i = 0; i < 1000; ++i) {
        DgBatch batch = stream.next();
        ok &= batch.size() == 96;
        size_t counts[3] = {0, 0, 0};
        for (const std::string& name : batch.domain_of)
            for (size_t s = 0; s < 3; ++s)
                if (name == domains[s].name()) ++counts[s];
        ok &= counts[0] == 32 && counts[1] == 32 && counts[2] == 32;
    }
    detail = "1000 batches, 32 per domain, B = 96";
    return ok;
}

// 7. compute_metrics equals a brute-force confusion-matrix evaluation
//    exactly, including ground truths with absent classes.
bool criterion_metrics(std::string& detail) {
    bool ok = true;
    RngStream r(71);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 2 + static_cast<int>(r.next_below(5));
        const size_t n = 1 + r.next_below(50);
        const int label_cap = 1 + static_cast<int>(r.next_below(static_cast<std::uint64_t>(k)));
        std::vector<int> labels, preds;
        for (size_t i = 0; i < n; ++i) {
            labels.push_back(static_cast<int>(r.next_below(static_cast<std::uint64_t>(label_cap))));
            preds.push_back(static_cast<int>(r.next_below(static_cast<std::uint64_t>(k))));
        }
        const Metrics m = compute_metrics(preds, labels, k);

        std::vector<std::vector<long long>> cm(static_cast<size_t>(k),
                                               std::vector<long long>(static_cast<size_t>(k), 0));
        for (size_t i = 0; i < n; ++i)
            cm[static_cast<size_t>(labels[i])][static_cast<size_t>(preds[i])]++;

        long long diag = 0;
        for (int c = 0; c < k; ++c) {
            diag += cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
            for (int o = 0; o < k; ++o) ok &= m.confusion.at(c, o) == cm[static_cast<size_t>(c)][static_cast<size_t>(o)];
        }
        ok &= m.accuracy == static_cast<double>(diag) / static_cast<double>(n);

        double macro = 0.0, weighted = 0.0;
        int present = 0;
        for (int c = 0; c < k; ++c) {
            long long tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
            long long fp = 0, fn = 0, support = 0;
            for (int o = 0; o < k; ++o) {
                if (o != c) {
                    fp += cm[static_cast<size_t>(o)][static_cast<size_t>(c)];
                    fn += cm[static_cast<size_t>(c)][static_cast<size_t>(o)];
                }
                support += cm[static_cast<size_t>(c)][static_cast<size_t>(o)];
            }
            const double p = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
            const double rc = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
            const double f1 = (p + rc > 0.0) ? 2.0 * p * rc / (p + rc) : 0.0;
            ok &= m.per_class_f1[static_cast<size_t>(c)] == f1;
            if (support > 0) {
                macro += f1;
                weighted += f1 * static_cast<double>(support);
                ++present;
            }
        }
        ok &= m.macro_f1 == macro / static_cast<double>(present);
        ok &= m.weighted_f1 == weighted / static_cast<double>(n);
    }
    detail = "1000 instances, K in {2..6}, exact equality";
    return ok;
}

// 8. Desk-scale end-to-end run: 3 synthetic sources, 1 shifted target, toy
//    encoders, 300 steps per strategy; every trained strategy clears the
//    macro-F1 floor on the held-out domain, and a zero-token conditioner
//    reproduces zero-shot predictions exactly.
bool criterion_end_to_end(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    struct Run { Strategy s; double lr; double f1 = 0.0; };
    std::vector<Run> runs = {{Strategy::Erm, 0.01},
                             {Strategy::NaiveMm, 0.002},
                             {Strategy::CoopLvt, 0.002}};

    for (Run& run : runs) {
        ExperimentConfig cfg = desk_config(run.s, run.lr);
        std::vector<DomainDataset> all = load_domains(cfg);
        const TaskLabels task = task_from_domains(all);
        detail::TrialDomains td = detail::clone_with_log(all);
        std::vector<DomainDataset> sources(td.all.begin(), td.all.begin() + 3);
        TrialResult trial = run_single_trial(cfg, task, sources, 0, *td.log, "desk");
        td.log->set_phase("test/desk");
        run.f1 = evaluate_model_on_domain(trial.model, td.all[3]).macro_f1;
        ok &= run.f1 >= kTargetF1Floor;
    }

    {
        ExperimentConfig coop = desk_config(Strategy::CoopLvt, 0.002);
        coop.n_p = 0;
        std::vector<DomainDataset> all = load_domains(coop);
        const TaskLabels task = task_from_domains(all);
        Model conditioned = build_model(coop, task, 0);

        ExperimentConfig zs = desk_config(Strategy::ZeroShot, 0.0);
        Model reference = build_model(zs, task, 0);

        auto [coop_preds, labels] = predict_dataset(conditioned, all[3]);
        auto [zs_preds, labels2] = predict_dataset(reference, all[3]);
        ok &= coop_preds == zs_preds;
    }

    const double secs = seconds_since(t0);
    ok &= secs < kEndToEndBudgetSec;
    char buf[128];
    std::snprintf(buf, sizeof buf, "target F1 erm %.2f, naive_mm %.2f, cooplvt %.2f, %.1f s",
                  runs[0].f1, runs[1].f1, runs[2].f1, secs);
    detail = buf;
    return ok;
}

// 9. Reduction identity: a zero-token conditioner makes cooplvt inference
//    equal zero-shot classification on random inputs, prediction for
//    prediction.
bool criterion_reduction(std::string& detail) {
    bool ok = true;
    const EncoderDims dims = tiny_dims();
    EncoderBundle bundle = build_toy_bundle(dims, 21);
    PromptSet ps = build_prompt_set(PromptFamily::Custom, synth_class_names(4),
                                    bundle.tokenizer);
    RngStream ginit(31);
    Conditioner g(dims.d_i, 0, dims.d_t, 2, ginit);
    const Tensor t_classes = prompt_features(bundle, ps);

    RngStream r(87);
    for (int i = 0; i < 100; ++i) {
        const Image img = random_image(dims, r);
        const int coop = cooplvt_infer(bundle, g, ps, img).first;
        const Tensor v = encode_image_values(bundle, {img});
        const int zs = zero_shot_classify(v, t_classes)[0];
        ok &= coop == zs;
    }
    detail = "100 random inputs, exact prediction equality";
    return ok;
}

// 10. Reproducibility through the real binary: the same config file and
//     seed produce identical run-file metrics across two executions.
bool criterion_reproducibility(std::string& detail) {
    const fs::path root =
        fs::temp_directory_path() / ("vldg-accept-" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    bool ok = true;

    ExperimentConfig cfg = desk_config(Strategy::CoopLvt, 0.002);
    cfg.steps = 40;
    cfg.eval_interval = 20;
    cfg.data.synth->n_domains = 3;
    cfg.data.synth->samples_per_class = 8;
    write_json_file_atomic((root / "cfg.json").string(), cfg.resolved());

    auto execute = [&](const std::string& out) {
        const std::string cmd = "\"" VLDG_CLI_PATH "\" multi-source --config \"" +
                                (root / "cfg.json").string() + "\" --out \"" +
                                (root / out).string() + "\" > \"" +
                                (root / (out + ".log")).string() + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        return WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
    };
    ok &= execute("r1");
    ok &= execute("r2");

    int compared = 0;
    for (int d = 0; d < 3 && ok; ++d) {
        const std::string rel = "runs/run-synth" + std::to_string(d) + "-seed0.json";
        const Json a = read_json_file((root / "r1" / rel).string());
        const Json b = read_json_file((root / "r2" / rel).string());
        ok &= a.at("metrics") == b.at("metrics");
        ok &= a.at("val_history") == b.at("val_history");
        ok &= a.at("selected_step") == b.at("selected_step");
        ok &= a.at("config_hash") == b.at("config_hash");
        ++compared;
    }
    ok &= compared == 3;

    std::error_code ec;
    fs::remove_all(root, ec);
    detail = "two binary executions, 3 run files compared";
    return ok;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* label;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "loss oracles", criterion_loss_oracles},
        {2, "gradient checks", criterion_gradients},
        {3, "conditioner shape and sequence length law", criterion_shapes},
        {4, "freezing contracts", criterion_freezing},
        {5, "target-domain isolation", criterion_isolation},
        {6, "sampler law", criterion_sampler},
        {7, "metric oracle", criterion_metrics},
        {8, "desk-scale end-to-end run", criterion_end_to_end},
        {9, "zero-token reduction identity", criterion_reduction},
        {10, "run-file reproducibility", criterion_reproducibility},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string extra;
        bool ok = false;
        try {
            ok = c.fn(extra);
        } catch (const std::exception& e) {
            extra = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::printf("criterion %2d: %s  %s (%s)\n", c.id, ok ? "PASS" : "FAIL", c.label,
                    extra.c_str());
        std::fflush(stdout);
    }
    if (failures) std::printf("%d of 10 criteria failed\n", failures);
    return failures ? 1 : 0;
}
