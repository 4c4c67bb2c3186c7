#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "vldg/core.hpp"

namespace vldg {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    int k = 0;
    std::vector<long long> counts;

    explicit ConfusionMatrix(int classes = 0)
        : k(classes), counts(static_cast<size_t>(classes) * static_cast<size_t>(classes), 0) {}

    long long& at(int truth, int pred) {
        return counts[static_cast<size_t>(truth) * static_cast<size_t>(k) +
                      static_cast<size_t>(pred)];
    }
    long long at(int truth, int pred) const {
        return counts[static_cast<size_t>(truth) * static_cast<size_t>(k) +
                      static_cast<size_t>(pred)];
    }

    long long total() const {
        long long t = 0;
        for (long long c : counts) t += c;
        return t;
    }
};

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> per_class_f1;
    std::set<int> present_classes;
    ConfusionMatrix confusion;
};

/// Accuracy plus per-class F1. Per-class precision/recall default to 0 on
/// empty denominators; macro-F1 averages only over classes present in the
/// ground truth, so structurally absent classes never depress it.
inline Metrics compute_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                               int k) {
    if (preds.size() != labels.size())
        throw Error("compute_metrics: preds and labels must have equal length");
    if (preds.empty()) throw Error("compute_metrics: empty input");
    if (k < 1) throw Error("compute_metrics: k must be positive");

    Metrics m;
    m.confusion = ConfusionMatrix(k);
    for (size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k)
            throw Error("compute_metrics: label " + std::to_string(labels[i]) +
                        " out of range [0, " + std::to_string(k) + ")");
        if (preds[i] < 0 || preds[i] >= k)
            throw Error("compute_metrics: prediction " + std::to_string(preds[i]) +
                        " out of range [0, " + std::to_string(k) + ")");
        m.confusion.at(labels[i], preds[i])++;
        m.present_classes.insert(labels[i]);
    }

    long long correct = 0;
    for (int c = 0; c < k; ++c) correct += m.confusion.at(c, c);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());

    m.per_class_f1.assign(static_cast<size_t>(k), 0.0);
    double macro_sum = 0.0, weighted_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        long long tp = m.confusion.at(c, c);
        long long fp = 0, fn = 0, support = 0;
        for (int o = 0; o < k; ++o) {
            if (o != c) {
                fp += m.confusion.at(o, c);
                fn += m.confusion.at(c, o);
            }
            support += m.confusion.at(c, o);
        }
        const double precision =
            (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall =
            (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        m.per_class_f1[static_cast<size_t>(c)] = f1;
        if (m.present_classes.count(c)) {
            macro_sum += f1;
            weighted_sum += f1 * static_cast<double>(support);
        }
    }
    m.macro_f1 = macro_sum / static_cast<double>(m.present_classes.size());
    m.weighted_f1 = weighted_sum / static_cast<double>(preds.size());
    return m;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation (std = 0 for a single value).
inline MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) throw Error("mean_std: empty input");
    MeanStd out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(var / static_cast<double>(values.size()));
    return out;
}

/// "40.5 (0.4)" style cell: percentages at one decimal.
inline std::string format_mean_std_percent(const MeanStd& ms) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f (%.1f)", ms.mean * 100.0, ms.std * 100.0);
    return buf;
}

}  // namespace vldg
