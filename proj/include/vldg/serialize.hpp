#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "vldg/optim_param.hpp"
#include "vldg/tensor.hpp"

namespace vldg {

using Json = nlohmann::json;

inline Json tensor_to_json(const Tensor& t) {
    return Json{{"shape", t.shape()}, {"data", t.vec()}};
}

inline Tensor tensor_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("data"))
        throw Error("tensor json: expected {shape, data}");
    return Tensor(j.at("shape").get<std::vector<size_t>>(),
                  j.at("data").get<std::vector<double>>());
}

inline Json param_to_json(const Param& p) {
    Json j = tensor_to_json(p.value);
    j["trainable"] = p.trainable;
    return j;
}

inline void param_from_json(const Json& j, Param& p) {
    Tensor t = tensor_from_json(j);
    if (!t.same_shape(p.value))
        throw Error("param \"" + p.name + "\": stored shape " + t.shape_string() +
                    " does not match model shape " + p.value.shape_string());
    p.value = std::move(t);
    if (j.contains("trainable")) p.trainable = j.at("trainable").get<bool>();
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw Error("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

/// Write-temp-then-rename so concurrent readers never see partial files.
inline void write_json_file_atomic(const std::string& path, const Json& j, int indent = 1) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write " + tmp.string());
        out << j.dump(indent) << "\n";
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace vldg
