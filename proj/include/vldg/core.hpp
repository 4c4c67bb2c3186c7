#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vldg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration or usage problem; the CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset or manifest problem (missing files, bad labels, empty domains).
class DataError : public Error {
public:
    using Error::Error;
};

struct ClassLabel {
    int index = 0;
    std::string name;
};

/// Class inventory of a task. K = names.size(); labels index into it.
struct TaskLabels {
    std::vector<std::string> names;

    TaskLabels() = default;

    explicit TaskLabels(std::vector<std::string> class_names) : names(std::move(class_names)) {
        for (size_t i = 0; i < names.size(); ++i)
            for (size_t j = i + 1; j < names.size(); ++j)
                if (names[i] == names[j])
                    throw Error("duplicate class name \"" + names[i] + "\"");
    }

    static TaskLabels dr_task();

    int k() const { return static_cast<int>(names.size()); }

    ClassLabel label(int index) const {
        if (index < 0 || index >= k())
            throw Error("class index " + std::to_string(index) + " out of range [0, " +
                        std::to_string(k()) + ")");
        return ClassLabel{index, names[static_cast<size_t>(index)]};
    }
};

/// The five retinopathy grades, short form, casing fixed.
inline const std::vector<std::string>& dr_class_names() {
    static const std::vector<std::string> names = {
        "No DR", "mild DR", "moderate DR", "severe DR", "proliferative DR"};
    return names;
}

inline TaskLabels TaskLabels::dr_task() { return TaskLabels(dr_class_names()); }

/// Total batch size when drawing `per_domain` samples from each of
/// `num_domains` training domains.
inline int total_batch_size(int per_domain, int num_domains) {
    if (per_domain < 1)
        throw ConfigError("total_batch_size: per-domain batch size must be >= 1, got " +
                          std::to_string(per_domain));
    if (num_domains < 1)
        throw ConfigError("total_batch_size: number of training domains must be >= 1, got " +
                          std::to_string(num_domains));
    return per_domain * num_domains;
}

}  // namespace vldg
