#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vldg/core.hpp"

namespace vldg {

/// Case-sensitive whitespace tokenizer over a fixed vocabulary. Sequences
/// are framed as [sot, word ids..., eot]; unknown words are an error rather
/// than a silent OOV bucket.
class Tokenizer {
public:
    explicit Tokenizer(std::vector<std::string> words) {
        vocab_.reserve(words.size() + 2);
        vocab_.push_back("<sot>");
        vocab_.push_back("<eot>");
        for (std::string& w : words) {
            if (w.empty()) throw ConfigError("tokenizer: empty vocabulary word");
            if (ids_.count(w)) continue;
            ids_[w] = static_cast<int>(vocab_.size());
            vocab_.push_back(std::move(w));
        }
    }

    int sot() const { return 0; }
    int eot() const { return 1; }
    size_t vocab_size() const { return vocab_.size(); }
    bool knows(const std::string& word) const { return ids_.count(word) != 0; }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out{sot()};
        std::istringstream in(text);
        std::string word;
        while (in >> word) {
            auto it = ids_.find(word);
            if (it == ids_.end())
                throw ConfigError("tokenizer: word \"" + word + "\" not in vocabulary");
            out.push_back(it->second);
        }
        out.push_back(eot());
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (int id : ids) {
            if (id == sot() || id == eot()) continue;
            if (id < 0 || static_cast<size_t>(id) >= vocab_.size())
                throw Error("tokenizer: id " + std::to_string(id) + " out of range");
            if (!out.empty()) out += " ";
            out += vocab_[static_cast<size_t>(id)];
        }
        return out;
    }

private:
    std::vector<std::string> vocab_;
    std::map<std::string, int> ids_;
};

/// Vocabulary covering both prompt families for the retinopathy task plus
/// generic synthetic class words.
inline std::vector<std::string> default_vocab(int synth_classes = 16) {
    std::vector<std::string> words = {"a",        "photo",         "of",    "No",
                                      "mild",     "moderate",      "severe", "proliferative",
                                      "DR",       "Diabetic",      "Retinopathy"};
    for (int i = 0; i < synth_classes; ++i) words.push_back("class" + std::to_string(i));
    return words;
}

}  // namespace vldg
