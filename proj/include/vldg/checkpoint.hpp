#pragma once

#include <map>
#include <string>
#include <utility>

#include "vldg/optim.hpp"
#include "vldg/serialize.hpp"

namespace vldg {

inline constexpr const char* kCheckpointFormat = "vldg-checkpoint-v1";

/// A point-in-time copy of every parameter that training can move, plus the
/// optimizer moments, so a restored model is bit-identical to the original.
struct Checkpoint {
    int step = 0;
    std::string strategy;
    std::string config_hash;
    std::map<std::string, Tensor> tensors;
    std::map<std::string, AdamW::Slot> opt_state;
    long opt_step = 0;
};

inline Checkpoint snapshot_params(const std::vector<Param*>& params, int step,
                                  std::string strategy, std::string config_hash,
                                  const AdamW* opt = nullptr) {
    Checkpoint c;
    c.step = step;
    c.strategy = std::move(strategy);
    c.config_hash = std::move(config_hash);
    for (const Param* p : params) c.tensors.emplace(p->name, p->value);
    if (opt) {
        c.opt_state = opt->state();
        c.opt_step = opt->step_count();
    }
    return c;
}

inline void restore_params(const Checkpoint& c, const std::vector<Param*>& params) {
    for (Param* p : params) {
        auto it = c.tensors.find(p->name);
        if (it == c.tensors.end())
            throw DataError("checkpoint is missing parameter \"" + p->name + "\"");
        if (!it->second.same_shape(p->value))
            throw DataError("checkpoint parameter \"" + p->name + "\" has shape " +
                            it->second.shape_string() + ", model expects " +
                            p->value.shape_string());
        p->value = it->second;
    }
}

inline Json checkpoint_to_json(const Checkpoint& c) {
    Json tensors = Json::object();
    for (const auto& [name, t] : c.tensors) tensors[name] = tensor_to_json(t);
    Json slots = Json::object();
    for (const auto& [name, s] : c.opt_state)
        slots[name] = Json{{"m", tensor_to_json(s.m)}, {"v", tensor_to_json(s.v)}};
    return Json{{"format", kCheckpointFormat},
                {"step", c.step},
                {"strategy", c.strategy},
                {"config_hash", c.config_hash},
                {"tensors", tensors},
                {"opt_state", slots},
                {"opt_step", c.opt_step}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
        throw DataError("not a " + std::string(kCheckpointFormat) + " file");
    Checkpoint c;
    c.step = j.at("step").get<int>();
    c.strategy = j.at("strategy").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    for (auto it = j.at("tensors").begin(); it != j.at("tensors").end(); ++it)
        c.tensors.emplace(it.key(), tensor_from_json(it.value()));
    if (j.contains("opt_state"))
        for (auto it = j.at("opt_state").begin(); it != j.at("opt_state").end(); ++it)
            c.opt_state.emplace(it.key(),
                                AdamW::Slot{tensor_from_json(it.value().at("m")),
                                            tensor_from_json(it.value().at("v"))});
    c.opt_step = j.value("opt_step", 0L);
    return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    write_json_file_atomic(path, checkpoint_to_json(c), -1);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw DataError("cannot open checkpoint file " + path);
    return checkpoint_from_json(read_json_file(path));
}

}  // namespace vldg
