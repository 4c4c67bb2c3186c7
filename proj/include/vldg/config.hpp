#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vldg/augment.hpp"
#include "vldg/core.hpp"
#include "vldg/encoders.hpp"
#include "vldg/prompts.hpp"
#include "vldg/serialize.hpp"
#include "vldg/strategies.hpp"
#include "vldg/synth.hpp"

namespace vldg {

struct EncoderSpec {
    std::string kind = "toy";  // toy | file
    std::uint64_t seed = 0;
    TextMode text_mode = TextMode::Attn;
    EncoderDims dims;
    std::string path;  // kind = file
};

struct DataSpec {
    std::string root;
    std::vector<std::string> domains;
    std::optional<SynthSpec> synth;
    std::uint64_t synth_seed = 0;
    bool augment_enabled = true;
    AugmentConfig augment;
    std::optional<NormalizeStats> normalize;  // absent = identity
};

struct OutputSpec {
    std::string dir = "out";
    int workers = 1;
    bool overwrite = false;
};

/// The fully resolved experiment description. Every field is echoed back
/// into run files and reports so any row is reproducible from the report.
struct ExperimentConfig {
    Strategy strategy = Strategy::Erm;
    std::vector<std::string> source_domains;  // explicit single-trial runs only
    std::string target_domain;                // explicit single-trial runs only
    int b = 32;
    double lr = 2e-3;
    double weight_decay = 0.0;
    std::string optimizer = "adamw";
    int steps = 300;
    int eval_interval = 100;
    double val_fraction = 0.2;
    std::vector<std::uint64_t> trial_seeds = {0, 1, 2};
    PromptFamily prompt_family = PromptFamily::I;
    std::string custom_classes_path;
    int n_p = 4;
    int mlp_layers = 2;
    double init_scale = 14.3;
    bool learnable_scale = true;

    EncoderSpec encoder;
    DataSpec data;
    OutputSpec output;

    Json resolved() const;
    std::string config_hash() const;
};

namespace cfgdetail {

inline void require_keys(const Json& j, const std::string& section,
                         const std::set<std::string>& known) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError(section + ": unknown key \"" + it.key() + "\"");
}

template <typename T>
T get_as(const Json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

template <typename T>
void read_field(const Json& section, const std::string& section_name, const char* key, T& out) {
    if (section.contains(key)) out = get_as<T>(section.at(key), section_name + "." + key);
}

inline Json augment_json(const AugmentConfig& a, bool enabled) {
    return Json{{"enabled", enabled},
                {"flip_p", a.flip_p},
                {"grayscale_p", a.grayscale_p},
                {"jitter_p", a.jitter_p},
                {"jitter_strength", a.jitter_strength},
                {"rotation_p", a.rotation_p},
                {"rotation_max_deg", a.rotation_max_deg},
                {"translate_p", a.translate_p},
                {"translate_max_frac", a.translate_max_frac},
                {"blur_p", a.blur_p},
                {"blur_sigma_lo", a.blur_sigma_lo},
                {"blur_sigma_hi", a.blur_sigma_hi}};
}

inline Json synth_json(const SynthSpec& s, std::uint64_t seed) {
    return Json{{"n_domains", s.n_domains},
                {"n_classes", s.n_classes},
                {"samples_per_class", s.samples_per_class},
                {"image_side", s.image_side},
                {"class_signal_strength", s.class_signal_strength},
                {"domain_shift_strength", s.domain_shift_strength},
                {"noise_sigma", s.noise_sigma},
                {"pattern_grid", s.pattern_grid},
                {"seed", seed}};
}

inline Json dims_json(const EncoderDims& d) {
    return Json{{"d_i", d.d_i},       {"c_f", d.c_f},
                {"d_t", d.d_t},       {"l_max", d.l_max},
                {"image_side", d.image_side}, {"patch_grid", d.patch_grid},
                {"channels", d.channels}};
}

}  // namespace cfgdetail

inline Json ExperimentConfig::resolved() const {
    Json exp{{"strategy", strategy_name(strategy)},
             {"source_domains", source_domains},
             {"target_domain", target_domain},
             {"b", b},
             {"lr", lr},
             {"weight_decay", weight_decay},
             {"optimizer", optimizer},
             {"steps", steps},
             {"eval_interval", eval_interval},
             {"val_fraction", val_fraction},
             {"trial_seeds", trial_seeds},
             {"prompt_family", prompt_family_name(prompt_family)},
             {"custom_classes", custom_classes_path},
             {"n_p", n_p},
             {"mlp_layers", mlp_layers},
             {"init_scale", init_scale},
             {"learnable_scale", learnable_scale}};
    Json enc{{"kind", encoder.kind}};
    if (encoder.kind == "toy") {
        enc["seed"] = encoder.seed;
        enc["text_mode"] = encoder.text_mode == TextMode::Attn ? "attn" : "bag";
        enc["dims"] = cfgdetail::dims_json(encoder.dims);
    } else {
        enc["path"] = encoder.path;
    }
    Json dat{{"root", data.root},
             {"domains", data.domains},
             {"augment", cfgdetail::augment_json(data.augment, data.augment_enabled)}};
    if (data.synth) dat["synth"] = cfgdetail::synth_json(*data.synth, data.synth_seed);
    if (data.normalize)
        dat["normalize"] = Json{{"mean", data.normalize->mean}, {"std", data.normalize->std}};
    Json out{{"dir", output.dir}, {"workers", output.workers}, {"overwrite", output.overwrite}};
    return Json{{"experiment", exp}, {"encoder", enc}, {"data", dat}, {"output", out}};
}

/// Hash of the experiment identity: everything in resolved() except the
/// output section, so the same experiment rerun into a different directory
/// keeps its hash.
inline std::string ExperimentConfig::config_hash() const {
    Json fingerprint = resolved();
    fingerprint.erase("output");
    const std::string dump = fingerprint.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

/// Checks every invariant and fills defaults. Throws ConfigError with a
/// field-path diagnostic on the first violation; never crashes on malformed
/// trees.
inline ExperimentConfig validate_config(const Json& raw) {
    using namespace cfgdetail;
    if (!raw.is_object()) throw ConfigError("config root must be an object");
    require_keys(raw, "config", {"experiment", "encoder", "data", "output"});

    ExperimentConfig cfg;

    const Json exp = raw.contains("experiment") ? raw.at("experiment") : Json::object();
    if (!exp.is_object()) throw ConfigError("experiment: must be an object");
    require_keys(exp, "experiment",
                 {"strategy", "source_domains", "target_domain", "b", "lr", "weight_decay",
                  "optimizer", "steps", "eval_interval", "val_fraction", "trial_seeds",
                  "prompt_family", "custom_classes", "n_p", "mlp_layers", "init_scale",
                  "learnable_scale"});
    if (exp.contains("strategy")) {
        const std::string s = get_as<std::string>(exp.at("strategy"), "experiment.strategy");
        try {
            cfg.strategy = strategy_from_name(s);
        } catch (const ConfigError& e) {
            throw ConfigError("experiment.strategy: " + std::string(e.what()));
        }
    }
    read_field(exp, "experiment", "source_domains", cfg.source_domains);
    read_field(exp, "experiment", "target_domain", cfg.target_domain);
    read_field(exp, "experiment", "b", cfg.b);
    read_field(exp, "experiment", "lr", cfg.lr);
    read_field(exp, "experiment", "weight_decay", cfg.weight_decay);
    read_field(exp, "experiment", "optimizer", cfg.optimizer);
    read_field(exp, "experiment", "steps", cfg.steps);
    read_field(exp, "experiment", "eval_interval", cfg.eval_interval);
    read_field(exp, "experiment", "val_fraction", cfg.val_fraction);
    read_field(exp, "experiment", "trial_seeds", cfg.trial_seeds);
    if (exp.contains("prompt_family"))
        cfg.prompt_family = prompt_family_from_name(
            get_as<std::string>(exp.at("prompt_family"), "experiment.prompt_family"));
    read_field(exp, "experiment", "custom_classes", cfg.custom_classes_path);
    read_field(exp, "experiment", "n_p", cfg.n_p);
    read_field(exp, "experiment", "mlp_layers", cfg.mlp_layers);
    read_field(exp, "experiment", "init_scale", cfg.init_scale);
    read_field(exp, "experiment", "learnable_scale", cfg.learnable_scale);

    if (!raw.contains("encoder")) throw ConfigError("encoder: missing encoder spec");
    const Json enc = raw.at("encoder");
    if (!enc.is_object()) throw ConfigError("encoder: must be an object");
    require_keys(enc, "encoder", {"kind", "seed", "text_mode", "dims", "path"});
    read_field(enc, "encoder", "kind", cfg.encoder.kind);
    if (cfg.encoder.kind != "toy" && cfg.encoder.kind != "file")
        throw ConfigError("encoder.kind: expected \"toy\" or \"file\", got \"" +
                          cfg.encoder.kind + "\"");
    read_field(enc, "encoder", "seed", cfg.encoder.seed);
    if (enc.contains("text_mode")) {
        const std::string m = get_as<std::string>(enc.at("text_mode"), "encoder.text_mode");
        if (m == "attn")
            cfg.encoder.text_mode = TextMode::Attn;
        else if (m == "bag")
            cfg.encoder.text_mode = TextMode::Bag;
        else
            throw ConfigError("encoder.text_mode: expected \"attn\" or \"bag\"");
    }
    if (enc.contains("dims")) {
        const Json d = enc.at("dims");
        if (!d.is_object()) throw ConfigError("encoder.dims: must be an object");
        require_keys(d, "encoder.dims",
                     {"d_i", "c_f", "d_t", "l_max", "image_side", "patch_grid", "channels"});
        read_field(d, "encoder.dims", "d_i", cfg.encoder.dims.d_i);
        read_field(d, "encoder.dims", "c_f", cfg.encoder.dims.c_f);
        read_field(d, "encoder.dims", "d_t", cfg.encoder.dims.d_t);
        read_field(d, "encoder.dims", "l_max", cfg.encoder.dims.l_max);
        read_field(d, "encoder.dims", "image_side", cfg.encoder.dims.image_side);
        read_field(d, "encoder.dims", "patch_grid", cfg.encoder.dims.patch_grid);
        read_field(d, "encoder.dims", "channels", cfg.encoder.dims.channels);
    }
    read_field(enc, "encoder", "path", cfg.encoder.path);
    if (cfg.encoder.kind == "file" && cfg.encoder.path.empty())
        throw ConfigError("encoder.path: required when encoder.kind is \"file\"");

    const Json dat = raw.contains("data") ? raw.at("data") : Json::object();
    if (!dat.is_object()) throw ConfigError("data: must be an object");
    require_keys(dat, "data", {"root", "domains", "synth", "augment", "normalize"});
    read_field(dat, "data", "root", cfg.data.root);
    read_field(dat, "data", "domains", cfg.data.domains);
    if (dat.contains("synth")) {
        const Json s = dat.at("synth");
        if (!s.is_object()) throw ConfigError("data.synth: must be an object");
        require_keys(s, "data.synth",
                     {"n_domains", "n_classes", "samples_per_class", "image_side",
                      "class_signal_strength", "domain_shift_strength", "noise_sigma",
                      "pattern_grid", "seed"});
        SynthSpec spec;
        read_field(s, "data.synth", "n_domains", spec.n_domains);
        read_field(s, "data.synth", "n_classes", spec.n_classes);
        read_field(s, "data.synth", "samples_per_class", spec.samples_per_class);
        read_field(s, "data.synth", "image_side", spec.image_side);
        read_field(s, "data.synth", "class_signal_strength", spec.class_signal_strength);
        read_field(s, "data.synth", "domain_shift_strength", spec.domain_shift_strength);
        read_field(s, "data.synth", "noise_sigma", spec.noise_sigma);
        read_field(s, "data.synth", "pattern_grid", spec.pattern_grid);
        read_field(s, "data.synth", "seed", cfg.data.synth_seed);
        spec.validate();
        cfg.data.synth = spec;
    }
    if (dat.contains("augment")) {
        const Json a = dat.at("augment");
        if (!a.is_object()) throw ConfigError("data.augment: must be an object");
        require_keys(a, "data.augment",
                     {"enabled", "flip_p", "grayscale_p", "jitter_p", "jitter_strength",
                      "rotation_p", "rotation_max_deg", "translate_p", "translate_max_frac",
                      "blur_p", "blur_sigma_lo", "blur_sigma_hi"});
        AugmentConfig& ag = cfg.data.augment;
        read_field(a, "data.augment", "enabled", cfg.data.augment_enabled);
        read_field(a, "data.augment", "flip_p", ag.flip_p);
        read_field(a, "data.augment", "grayscale_p", ag.grayscale_p);
        read_field(a, "data.augment", "jitter_p", ag.jitter_p);
        read_field(a, "data.augment", "jitter_strength", ag.jitter_strength);
        read_field(a, "data.augment", "rotation_p", ag.rotation_p);
        read_field(a, "data.augment", "rotation_max_deg", ag.rotation_max_deg);
        read_field(a, "data.augment", "translate_p", ag.translate_p);
        read_field(a, "data.augment", "translate_max_frac", ag.translate_max_frac);
        read_field(a, "data.augment", "blur_p", ag.blur_p);
        read_field(a, "data.augment", "blur_sigma_lo", ag.blur_sigma_lo);
        read_field(a, "data.augment", "blur_sigma_hi", ag.blur_sigma_hi);
    }
    if (dat.contains("normalize")) {
        const Json n = dat.at("normalize");
        if (!n.is_object()) throw ConfigError("data.normalize: must be an object");
        require_keys(n, "data.normalize", {"mean", "std"});
        NormalizeStats st;
        read_field(n, "data.normalize", "mean", st.mean);
        read_field(n, "data.normalize", "std", st.std);
        if (st.mean.size() != st.std.size())
            throw ConfigError("data.normalize: mean and std must have equal length");
        cfg.data.normalize = st;
    }
    if (const char* env = std::getenv("VLDG_DATA_ROOT"); env && *env) cfg.data.root = env;

    const Json out = raw.contains("output") ? raw.at("output") : Json::object();
    if (!out.is_object()) throw ConfigError("output: must be an object");
    require_keys(out, "output", {"dir", "workers", "overwrite"});
    read_field(out, "output", "dir", cfg.output.dir);
    read_field(out, "output", "workers", cfg.output.workers);
    read_field(out, "output", "overwrite", cfg.output.overwrite);

    for (size_t i = 0; i < cfg.source_domains.size(); ++i)
        for (size_t j = i + 1; j < cfg.source_domains.size(); ++j)
            if (cfg.source_domains[i] == cfg.source_domains[j])
                throw ConfigError("experiment.source_domains: duplicate domain \"" +
                                  cfg.source_domains[i] + "\"");
    if (!cfg.target_domain.empty())
        for (const std::string& s : cfg.source_domains)
            if (s == cfg.target_domain)
                throw ConfigError(
                    "experiment.target_domain: target_domain must not appear in "
                    "source_domains");
    if (cfg.b < 1) throw ConfigError("experiment.b: must be >= 1");
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr))
        throw ConfigError("experiment.lr: must be a finite nonnegative number");
    if (cfg.weight_decay < 0.0)
        throw ConfigError("experiment.weight_decay: must be nonnegative");
    if (cfg.optimizer != "adamw")
        throw ConfigError("experiment.optimizer: only \"adamw\" is supported");
    if (cfg.steps < 1) throw ConfigError("experiment.steps: must be >= 1");
    if (cfg.eval_interval < 1) throw ConfigError("experiment.eval_interval: must be >= 1");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ConfigError("experiment.val_fraction: must lie strictly between 0 and 1");
    if (cfg.trial_seeds.empty())
        throw ConfigError("experiment.trial_seeds: must name at least one seed");
    {
        std::set<std::uint64_t> seen(cfg.trial_seeds.begin(), cfg.trial_seeds.end());
        if (seen.size() != cfg.trial_seeds.size())
            throw ConfigError("experiment.trial_seeds: seeds must be unique");
    }
    if (cfg.strategy == Strategy::CoopLvt && cfg.n_p < 1)
        throw ConfigError("experiment.n_p: must be >= 1 when strategy is cooplvt");
    if (cfg.n_p < 0) throw ConfigError("experiment.n_p: must be nonnegative");
    if (cfg.mlp_layers < 1) throw ConfigError("experiment.mlp_layers: must be >= 1");
    if (cfg.init_scale < 1.0 || cfg.init_scale > 100.0)
        throw ConfigError("experiment.init_scale: must lie in [1, 100]");
    if (cfg.output.workers < 1) throw ConfigError("output.workers: must be >= 1");

    if (!cfg.data.synth && (cfg.data.root.empty() || cfg.data.domains.empty()))
        throw ConfigError("data: provide either a synth block or root + domains");
    if (cfg.data.synth && !cfg.data.domains.empty())
        throw ConfigError("data: synth and domains are mutually exclusive");

    return cfg;
}

inline Json read_config_file(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("cannot open config file " + path);
    try {
        return read_json_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return validate_config(read_config_file(path));
}

/// Applies CLI flag overrides onto a raw config tree. Flags win over file
/// values; validation runs after.
struct FlagOverrides {
    std::optional<std::string> strategy;
    std::optional<std::string> target;
    std::optional<std::string> seeds_csv;
    std::optional<int> steps;
    std::optional<int> b;
    std::optional<double> lr;
    std::optional<std::string> prompt_family;
    std::optional<int> n_p;
    std::optional<int> mlp_layers;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    bool overwrite = false;
};

inline Json apply_overrides(Json raw, const FlagOverrides& f) {
    if (!raw.is_object()) throw ConfigError("config root must be an object");
    Json& exp = raw["experiment"];
    if (exp.is_null()) exp = Json::object();
    if (f.strategy) exp["strategy"] = *f.strategy;
    if (f.target) exp["target_domain"] = *f.target;
    if (f.seeds_csv) {
        std::vector<std::uint64_t> seeds;
        std::string cur;
        for (char c : *f.seeds_csv + ",") {
            if (c == ',') {
                if (cur.empty()) continue;
                try {
                    seeds.push_back(std::stoull(cur));
                } catch (const std::exception&) {
                    throw ConfigError("--seeds: \"" + cur + "\" is not an integer");
                }
                cur.clear();
            } else {
                cur += c;
            }
        }
        exp["trial_seeds"] = seeds;
    }
    if (f.steps) exp["steps"] = *f.steps;
    if (f.b) exp["b"] = *f.b;
    if (f.lr) exp["lr"] = *f.lr;
    if (f.prompt_family) exp["prompt_family"] = *f.prompt_family;
    if (f.n_p) exp["n_p"] = *f.n_p;
    if (f.mlp_layers) exp["mlp_layers"] = *f.mlp_layers;
    Json& out = raw["output"];
    if (out.is_null()) out = Json::object();
    if (f.out_dir) out["dir"] = *f.out_dir;
    if (f.workers) out["workers"] = *f.workers;
    if (f.overwrite) out["overwrite"] = true;
    return raw;
}

}  // namespace vldg
