#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "vldg/checkpoint.hpp"
#include "vldg/config.hpp"
#include "vldg/dataset.hpp"
#include "vldg/metrics.hpp"
#include "vldg/sampler.hpp"
#include "vldg/strategies.hpp"

namespace vldg {

/// K is the union of class inventories across every configured domain. Five
/// classes keep the canonical DR grade names; anything else gets generic
/// labels.
inline TaskLabels task_from_domains(const std::vector<DomainDataset>& domains) {
    if (domains.empty()) throw ConfigError("task: no domains configured");
    int k = 0;
    for (const DomainDataset& d : domains)
        for (int c : d.class_inventory()) k = std::max(k, c + 1);
    if (k == 5) return TaskLabels::dr_task();
    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("class" + std::to_string(c));
    return TaskLabels(std::move(names));
}

/// A strategy instance: encoders plus whatever heads the strategy trains.
/// The frozen/trainable wiring is fixed at build time.
struct Model {
    Strategy strategy = Strategy::Erm;
    EncoderBundle bundle;
    TaskLabels task;

    Model(Strategy s, EncoderBundle b, TaskLabels t)
        : strategy(s), bundle(std::move(b)), task(std::move(t)) {}
    PromptSet prompts;
    std::optional<ClassifierHead> head;
    std::optional<Conditioner> g;
    LogitScale scale;
    Tensor t_classes;  // frozen class-prompt features for zero_shot / naive_mm
    NormalizeStats stats;

    int k() const { return static_cast<int>(task.names.size()); }

    std::vector<Param*> tracked_params() {
        std::vector<Param*> out;
        auto extend = [&](const std::vector<Param*>& ps) {
            for (Param* p : ps) out.push_back(p);
        };
        switch (strategy) {
            case Strategy::Erm:
                extend(bundle.vision_params());
                extend(bundle.projector_params());
                extend(head->params());
                break;
            case Strategy::LinearProbe:
                extend(head->params());
                break;
            case Strategy::ZeroShot:
                break;
            case Strategy::NaiveMm:
                extend(bundle.vision_params());
                extend(bundle.projector_params());
                out.push_back(&scale.s);
                break;
            case Strategy::CoopLvt:
                extend(bundle.vision_params());
                extend(bundle.projector_params());
                extend(g->params());
                out.push_back(&scale.s);
                break;
        }
        return out;
    }

    double train_step(const std::vector<Image>& images, const std::vector<int>& labels,
                      AdamW& opt) {
        switch (strategy) {
            case Strategy::Erm:
                return erm_step(bundle, *head, images, labels, opt).loss;
            case Strategy::LinearProbe:
                return linear_probe_step(bundle, *head, images, labels, opt).loss;
            case Strategy::ZeroShot:
                return 0.0;
            case Strategy::NaiveMm:
                return naive_mm_step(bundle, t_classes, scale, images, labels, opt).loss;
            case Strategy::CoopLvt:
                return cooplvt_train_step(bundle, *g, prompts, scale, images, labels, opt)
                    .loss;
        }
        throw Error("unreachable strategy");
    }

    /// Eval-time predictions on already-preprocessed images.
    std::vector<int> predict(const std::vector<Image>& images) {
        std::vector<int> preds;
        preds.reserve(images.size());
        if (strategy == Strategy::CoopLvt) {
            for (const Image& img : images)
                preds.push_back(cooplvt_infer(bundle, *g, prompts, img).first);
            return preds;
        }
        constexpr size_t chunk = 256;
        for (size_t at = 0; at < images.size(); at += chunk) {
            const size_t n = std::min(chunk, images.size() - at);
            std::vector<Image> block(images.begin() + static_cast<long>(at),
                                     images.begin() + static_cast<long>(at + n));
            Tensor v = encode_image_values(bundle, block);
            if (strategy == Strategy::Erm || strategy == Strategy::LinearProbe) {
                Tape t;
                const Tensor logits = head->forward(t, t.constant(v)).value();
                for (size_t i = 0; i < logits.rows(); ++i) {
                    size_t best = 0;
                    for (size_t c = 1; c < logits.cols(); ++c)
                        if (logits(i, c) > logits(i, best)) best = c;
                    preds.push_back(static_cast<int>(best));
                }
            } else {
                for (int p : zero_shot_classify(v, t_classes)) preds.push_back(p);
            }
        }
        return preds;
    }

    Checkpoint snapshot(int step, const std::string& config_hash, const AdamW* opt = nullptr) {
        return snapshot_params(tracked_params(), step, strategy_name(strategy), config_hash,
                               opt);
    }

    void restore(const Checkpoint& c) {
        restore_params(c, tracked_params());
        if (strategy == Strategy::NaiveMm || strategy == Strategy::ZeroShot)
            t_classes = prompt_features(bundle, prompts);
    }
};

inline std::vector<std::string> class_strings_for_prompts(const ExperimentConfig& cfg,
                                                          const TaskLabels& task) {
    if (cfg.prompt_family == PromptFamily::Custom && !cfg.custom_classes_path.empty()) {
        auto strings = load_custom_class_strings(cfg.custom_classes_path);
        if (strings.size() != task.names.size())
            throw ConfigError("custom class strings: expected " +
                              std::to_string(task.names.size()) + " lines, got " +
                              std::to_string(strings.size()));
        return strings;
    }
    return task.names;
}

/// Builds a model per the config wiring. The encoder bundle is a pure
/// function of the encoder spec (the pretrained-weights stand-in); only
/// heads and the conditioner draw from the trial seed.
inline Model build_model(const ExperimentConfig& cfg, const TaskLabels& task,
                         std::uint64_t trial_seed) {
    const int k = static_cast<int>(task.names.size());
    std::vector<std::string> vocab = default_vocab(std::max(16, k));
    Model m(cfg.strategy,
            cfg.encoder.kind == "toy"
                ? build_toy_bundle(cfg.encoder.dims, cfg.encoder.seed, cfg.encoder.text_mode,
                                   std::move(vocab))
                : load_pretrained_bundle(cfg.encoder.path),
            task);
    m.stats = cfg.data.normalize ? *cfg.data.normalize
                                 : NormalizeStats::identity(m.bundle.dims.channels);
    m.scale = LogitScale(cfg.init_scale, cfg.learnable_scale);

    switch (cfg.strategy) {
        case Strategy::Erm: {
            RngStream init = derive_rng(trial_seed, "init/head");
            m.head.emplace(m.bundle.dims.c_f, k, init);
            m.bundle.text.set_trainable(false);
            break;
        }
        case Strategy::LinearProbe: {
            RngStream init = derive_rng(trial_seed, "init/head");
            m.head.emplace(m.bundle.dims.c_f, k, init);
            m.bundle.vision.set_trainable(false);
            m.bundle.projector.set_trainable(false);
            m.bundle.text.set_trainable(false);
            break;
        }
        case Strategy::ZeroShot: {
            m.bundle.vision.set_trainable(false);
            m.bundle.projector.set_trainable(false);
            m.bundle.text.set_trainable(false);
            break;
        }
        case Strategy::NaiveMm: {
            m.bundle.text.set_trainable(false);
            break;
        }
        case Strategy::CoopLvt: {
            m.bundle.text.set_trainable(false);
            RngStream init = derive_rng(trial_seed, "init/conditioner");
            m.g.emplace(m.bundle.dims.d_i, cfg.n_p, m.bundle.dims.d_t, cfg.mlp_layers, init);
            break;
        }
    }
    if (cfg.strategy != Strategy::Erm && cfg.strategy != Strategy::LinearProbe) {
        m.prompts = build_prompt_set(cfg.prompt_family, class_strings_for_prompts(cfg, task),
                                     m.bundle.tokenizer);
        if (cfg.strategy == Strategy::ZeroShot || cfg.strategy == Strategy::NaiveMm)
            m.t_classes = prompt_features(m.bundle, m.prompts);
    }
    return m;
}

inline int select_model(const std::vector<double>& val_history) {
    if (val_history.empty()) throw Error("select_model: empty history");
    int best = 0;
    for (size_t i = 1; i < val_history.size(); ++i)
        if (val_history[i] > val_history[static_cast<size_t>(best)])
            best = static_cast<int>(i);
    return best;
}

/// Eval-time preprocessing: resize and normalize only, never augmentation.
inline Image eval_transform(const Image& img, const EncoderDims& dims,
                            const NormalizeStats& stats) {
    return resize_and_normalize(img, dims.image_side, stats);
}

inline std::pair<std::vector<int>, std::vector<int>> predict_dataset(Model& model,
                                                                     const DomainDataset& d) {
    std::vector<Image> images;
    std::vector<int> labels;
    images.reserve(d.size());
    labels.reserve(d.size());
    for (size_t i = 0; i < d.size(); ++i) {
        images.push_back(eval_transform(d.image(i), model.bundle.dims, model.stats));
        labels.push_back(d.label(i));
    }
    return {model.predict(images), std::move(labels)};
}

inline Metrics evaluate_model_on_domain(Model& model, const DomainDataset& d) {
    auto [preds, labels] = predict_dataset(model, d);
    return compute_metrics(preds, labels, model.k());
}

struct TrialResult {
    Model model;
    std::vector<double> val_history;
    std::vector<Checkpoint> snapshots;
    int selected_index = 0;
    int selected_step = 0;

    explicit TrialResult(Model m) : model(std::move(m)) {}
};

/// Trains on the source domains and selects a checkpoint by pooled
/// source-val macro-F1. Target data is never touched here; the callers
/// verify that through the access log.
inline TrialResult run_single_trial(const ExperimentConfig& cfg, const TaskLabels& task,
                                    std::vector<DomainDataset>& sources,
                                    std::uint64_t trial_seed, AccessLog& log,
                                    const std::string& phase_tag) {
    if (sources.empty()) throw ConfigError("trial: no source domains");

    TrialResult out(build_model(cfg, task, trial_seed));
    Model& model = out.model;

    std::vector<SplitPair> splits;
    splits.reserve(sources.size());
    for (DomainDataset& d : sources)
        splits.push_back(split_train_val(d, 1.0 - cfg.val_fraction, trial_seed));

    std::vector<const DomainDataset*> train_sets;
    for (SplitPair& sp : splits) train_sets.push_back(&sp.train);

    const EncoderDims dims = model.bundle.dims;
    const NormalizeStats stats = model.stats;
    const AugmentConfig aug = cfg.data.augment;
    const bool augment_on = cfg.data.augment_enabled;
    DgBatchStream::Pipeline pipeline = [dims, stats, aug, augment_on](const Image& img,
                                                                      RngStream& rng) {
        Image a = augment_on ? augment(img, aug, rng) : img;
        return resize_and_normalize(a, dims.image_side, stats);
    };
    DgBatchStream stream(train_sets, cfg.b, trial_seed, pipeline);

    AdamW opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
    const std::string hash = cfg.config_hash();

    for (int step = 1; step <= cfg.steps; ++step) {
        log.set_phase("train/" + phase_tag);
        DgBatch batch = stream.next();
        model.train_step(batch.images, batch.labels, opt);
        if (step % cfg.eval_interval == 0) {
            log.set_phase("select/" + phase_tag);
            std::vector<int> preds, labels;
            for (SplitPair& sp : splits) {
                auto [p, l] = predict_dataset(model, sp.val);
                preds.insert(preds.end(), p.begin(), p.end());
                labels.insert(labels.end(), l.begin(), l.end());
            }
            out.val_history.push_back(compute_metrics(preds, labels, model.k()).macro_f1);
            out.snapshots.push_back(model.snapshot(step, hash, &opt));
        }
    }
    if (out.snapshots.empty()) {
        log.set_phase("select/" + phase_tag);
        std::vector<int> preds, labels;
        for (SplitPair& sp : splits) {
            auto [p, l] = predict_dataset(model, sp.val);
            preds.insert(preds.end(), p.begin(), p.end());
            labels.insert(labels.end(), l.begin(), l.end());
        }
        out.val_history.push_back(compute_metrics(preds, labels, model.k()).macro_f1);
        out.snapshots.push_back(model.snapshot(cfg.steps, hash, &opt));
    }
    out.selected_index = select_model(out.val_history);
    out.selected_step = out.snapshots[static_cast<size_t>(out.selected_index)].step;
    model.restore(out.snapshots[static_cast<size_t>(out.selected_index)]);
    return out;
}

inline Json metrics_to_json(const Metrics& m) {
    return Json{{"accuracy", m.accuracy},
                {"macro_f1", m.macro_f1},
                {"weighted_f1", m.weighted_f1},
                {"per_class_f1", m.per_class_f1}};
}

struct RunRecord {
    std::string mode;    // multi_source | single_source
    std::string target;  // multi_source: evaluated target
    std::string source;  // single_source: the sole training source
    std::uint64_t seed = 0;
    int selected_step = 0;
    Metrics metrics;                              // multi_source
    std::vector<std::pair<std::string, Metrics>> target_metrics;  // single_source
    std::vector<double> val_history;
};

inline Json run_record_to_json(const RunRecord& r, const ExperimentConfig& cfg, int k) {
    Json j{{"format", "vldg-run-v1"},
           {"mode", r.mode},
           {"strategy", strategy_name(cfg.strategy)},
           {"config_hash", cfg.config_hash()},
           {"config", cfg.resolved()},
           {"k", k},
           {"seed", r.seed},
           {"selected_step", r.selected_step},
           {"val_history", r.val_history}};
    if (r.mode == "multi_source") {
        j["target"] = r.target;
        j["metrics"] = metrics_to_json(r.metrics);
    } else {
        j["source"] = r.source;
        Json targets = Json::object();
        for (const auto& [name, m] : r.target_metrics) targets[name] = metrics_to_json(m);
        j["targets"] = targets;
    }
    return j;
}

/// Loads the configured domains: synthetic in-memory generation or the
/// on-disk layout under data.root.
inline std::vector<DomainDataset> load_domains(const ExperimentConfig& cfg) {
    if (cfg.data.synth) return synth_domains(*cfg.data.synth, cfg.data.synth_seed);
    std::vector<DomainDataset> out;
    out.reserve(cfg.data.domains.size());
    for (const std::string& name : cfg.data.domains)
        out.push_back(load_domain(cfg.data.root, name));
    return out;
}

namespace detail {

inline void run_jobs(std::vector<std::function<void()>>& jobs, int workers) {
    if (workers <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                jobs[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct TrialDomains {
    std::vector<DomainDataset> all;
    std::shared_ptr<AccessLog> log;
};

inline TrialDomains clone_with_log(const std::vector<DomainDataset>& base) {
    TrialDomains td;
    td.log = std::make_shared<AccessLog>();
    for (DomainDataset d : base) {
        d.attach_log(td.log);
        td.all.push_back(std::move(d));
    }
    return td;
}

inline void assert_isolation(const AccessLog& log, const std::vector<std::string>& holdouts,
                             const std::string& detail_tag) {
    for (const std::string& h : holdouts) {
        const size_t trained = log.count(h, "train");
        const size_t selected = log.count(h, "select");
        if (trained + selected > 0)
            throw Error("target-domain isolation violated: " + std::to_string(trained) +
                        " train and " + std::to_string(selected) + " selection reads of \"" +
                        h + "\" during " + detail_tag);
    }
}

}  // namespace detail

struct MultiSourceResult {
    std::vector<RunRecord> records;
    int k = 0;
    std::vector<std::string> domains;
    long training_runs = 0;
};

/// Leave-one-domain-out matrix: every domain takes a turn as the held-out
/// target while the rest train. Run files land under <out>/runs when an
/// output directory is given.
inline MultiSourceResult run_multi_source(const ExperimentConfig& cfg,
                                          const std::string& run_dir = "") {
    std::vector<DomainDataset> base = load_domains(cfg);
    if (base.size() < 2)
        throw ConfigError("multi-source protocol needs at least 2 domains, got " +
                          std::to_string(base.size()));
    const TaskLabels task = task_from_domains(base);
    const int k = static_cast<int>(task.names.size());

    MultiSourceResult result;
    result.k = k;
    for (const DomainDataset& d : base) result.domains.push_back(d.name());
    result.records.resize(base.size() * cfg.trial_seeds.size());
    std::atomic<long> runs{0};

    std::vector<std::function<void()>> jobs;
    for (size_t ti = 0; ti < base.size(); ++ti) {
        for (size_t si = 0; si < cfg.trial_seeds.size(); ++si) {
            const size_t slot = ti * cfg.trial_seeds.size() + si;
            jobs.push_back([&, ti, si, slot] {
                const std::uint64_t seed = cfg.trial_seeds[si];
                detail::TrialDomains td = detail::clone_with_log(base);
                const std::string target_name = td.all[ti].name();
                const std::string tag =
                    "target=" + target_name + "/seed=" + std::to_string(seed);

                std::vector<DomainDataset> sources;
                for (size_t j = 0; j < td.all.size(); ++j)
                    if (j != ti) sources.push_back(td.all[j]);

                TrialResult trial = run_single_trial(cfg, task, sources, seed, *td.log, tag);
                runs.fetch_add(1);

                td.log->set_phase("test/" + tag);
                Metrics m = evaluate_model_on_domain(trial.model, td.all[ti]);
                detail::assert_isolation(*td.log, {target_name}, tag);

                RunRecord rec;
                rec.mode = "multi_source";
                rec.target = target_name;
                rec.seed = seed;
                rec.selected_step = trial.selected_step;
                rec.metrics = m;
                rec.val_history = trial.val_history;
                result.records[slot] = rec;
                if (!run_dir.empty())
                    write_json_file_atomic(run_dir + "/run-" + target_name + "-seed" +
                                               std::to_string(seed) + ".json",
                                           run_record_to_json(rec, cfg, k));
            });
        }
    }
    detail::run_jobs(jobs, cfg.output.workers);
    result.training_runs = runs.load();
    return result;
}

/// Single-source rows: train on one domain, test on every other.
inline MultiSourceResult run_single_source(const ExperimentConfig& cfg,
                                           const std::string& run_dir = "") {
    std::vector<DomainDataset> base = load_domains(cfg);
    if (base.size() < 2)
        throw ConfigError("single-source protocol needs at least 2 domains, got " +
                          std::to_string(base.size()));
    const TaskLabels task = task_from_domains(base);
    const int k = static_cast<int>(task.names.size());

    MultiSourceResult result;
    result.k = k;
    for (const DomainDataset& d : base) result.domains.push_back(d.name());
    result.records.resize(base.size() * cfg.trial_seeds.size());
    std::atomic<long> runs{0};

    std::vector<std::function<void()>> jobs;
    for (size_t si_dom = 0; si_dom < base.size(); ++si_dom) {
        for (size_t si = 0; si < cfg.trial_seeds.size(); ++si) {
            const size_t slot = si_dom * cfg.trial_seeds.size() + si;
            jobs.push_back([&, si_dom, si, slot] {
                const std::uint64_t seed = cfg.trial_seeds[si];
                detail::TrialDomains td = detail::clone_with_log(base);
                const std::string source_name = td.all[si_dom].name();
                const std::string tag =
                    "source=" + source_name + "/seed=" + std::to_string(seed);

                std::vector<DomainDataset> sources = {td.all[si_dom]};
                TrialResult trial = run_single_trial(cfg, task, sources, seed, *td.log, tag);
                runs.fetch_add(1);

                RunRecord rec;
                rec.mode = "single_source";
                rec.source = source_name;
                rec.seed = seed;
                rec.selected_step = trial.selected_step;
                rec.val_history = trial.val_history;
                std::vector<std::string> holdouts;
                for (size_t j = 0; j < td.all.size(); ++j) {
                    if (j == si_dom) continue;
                    td.log->set_phase("test/" + tag + "/target=" + td.all[j].name());
                    rec.target_metrics.emplace_back(
                        td.all[j].name(), evaluate_model_on_domain(trial.model, td.all[j]));
                    holdouts.push_back(td.all[j].name());
                }
                detail::assert_isolation(*td.log, holdouts, tag);
                result.records[slot] = rec;
                if (!run_dir.empty())
                    write_json_file_atomic(run_dir + "/run-" + source_name + "-seed" +
                                               std::to_string(seed) + ".json",
                                           run_record_to_json(rec, cfg, k));
            });
        }
    }
    detail::run_jobs(jobs, cfg.output.workers);
    result.training_runs = runs.load();
    return result;
}

}  // namespace vldg
