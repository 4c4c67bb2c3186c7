#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "vldg/core.hpp"
#include "vldg/tokenizer.hpp"

namespace vldg {

enum class PromptFamily { I, II, Custom };

inline std::string prompt_family_name(PromptFamily f) {
    switch (f) {
        case PromptFamily::I: return "I";
        case PromptFamily::II: return "II";
        case PromptFamily::Custom: return "custom";
    }
    throw Error("unreachable prompt family");
}

inline PromptFamily prompt_family_from_name(const std::string& s) {
    if (s == "I") return PromptFamily::I;
    if (s == "II") return PromptFamily::II;
    if (s == "custom") return PromptFamily::Custom;
    throw ConfigError("unknown prompt family \"" + s + "\" (expected I, II, or custom)");
}

/// One tokenized prompt per class, ordered by class index.
struct PromptSet {
    PromptFamily family = PromptFamily::I;
    std::string template_str;
    std::vector<std::string> class_strings;
    std::vector<std::string> prompts;
    std::vector<std::vector<int>> token_sequences;
    std::string provenance;

    size_t k() const { return token_sequences.size(); }
};

namespace detail {

inline std::string substitute(const std::string& tmpl, const std::string& cls) {
    const std::string slot = "{c}";
    const size_t at = tmpl.find(slot);
    if (at == std::string::npos)
        throw ConfigError("prompt template \"" + tmpl + "\" lacks the {c} slot");
    std::string out = tmpl;
    out.replace(at, slot.size(), cls);
    return out;
}

/// Family II expands the short grade names to their long written forms.
inline std::string long_form(const std::string& name) {
    const std::string suffix = " DR";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        return name.substr(0, name.size() - suffix.size()) + " Diabetic Retinopathy";
    return name;
}

}  // namespace detail

inline PromptSet build_prompt_set(PromptFamily family,
                                  const std::vector<std::string>& class_names,
                                  const Tokenizer& tokenizer,
                                  const std::string& template_str = "a photo of a {c}") {
    if (class_names.empty()) throw ConfigError("build_prompt_set: empty class list");
    PromptSet ps;
    ps.family = family;
    ps.template_str = template_str;
    for (const std::string& name : class_names) {
        std::string cls = name;
        if (family == PromptFamily::II) cls = detail::long_form(name);
        ps.class_strings.push_back(cls);
        const std::string prompt = detail::substitute(template_str, cls);
        ps.prompts.push_back(prompt);
        ps.token_sequences.push_back(tokenizer.encode(prompt));
    }
    ps.provenance = "family " + prompt_family_name(family) + ", template \"" + template_str +
                    "\", " + std::to_string(class_names.size()) + " classes";
    return ps;
}

inline const std::vector<int>& prompt_tokens_for_label(const PromptSet& ps, int y) {
    if (y < 0 || static_cast<size_t>(y) >= ps.k())
        throw Error("prompt_tokens_for_label: class " + std::to_string(y) +
                    " out of range [0, " + std::to_string(ps.k()) + ")");
    return ps.token_sequences[static_cast<size_t>(y)];
}

/// Custom class strings: plain text, one per line, line order = class order.
inline std::vector<std::string> load_custom_class_strings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open custom prompt file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw ConfigError("custom prompt file is empty: " + path);
    return lines;
}

}  // namespace vldg
