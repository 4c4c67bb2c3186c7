#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vldg/image.hpp"
#include "vldg/image_io.hpp"
#include "vldg/rng.hpp"

namespace vldg {

/// Thread-safe record of every sample-image read, tagged with the phase the
/// protocol layer was in. The isolation tests key off this.
class AccessLog {
public:
    struct Entry {
        std::string phase;
        std::string domain;
        std::string sample_id;
    };

    void set_phase(std::string phase) {
        std::lock_guard<std::mutex> lock(mu_);
        phase_ = std::move(phase);
    }

    std::string phase() const {
        std::lock_guard<std::mutex> lock(mu_);
        return phase_;
    }

    void record(const std::string& domain, const std::string& sample_id) {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.push_back({phase_, domain, sample_id});
    }

    std::vector<Entry> entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

    size_t count(const std::string& domain, const std::string& phase_prefix) const {
        std::lock_guard<std::mutex> lock(mu_);
        size_t n = 0;
        for (const Entry& e : entries_)
            if (e.domain == domain && e.phase.rfind(phase_prefix, 0) == 0) ++n;
        return n;
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.clear();
    }

private:
    mutable std::mutex mu_;
    std::string phase_ = "unset";
    std::vector<Entry> entries_;
};

struct Sample {
    Image image;
    int label = 0;
    std::string id;
};

/// One named domain. Splits share the parent's sample storage; every image
/// read goes through the attached access log.
class DomainDataset {
public:
    DomainDataset() = default;

    DomainDataset(std::string name, std::vector<Sample> samples,
                  std::shared_ptr<AccessLog> log = nullptr)
        : name_(std::move(name)),
          storage_(std::make_shared<const std::vector<Sample>>(std::move(samples))),
          log_(std::move(log)) {
        index_.resize(storage_->size());
        for (size_t i = 0; i < index_.size(); ++i) index_[i] = i;
        recompute_inventory();
    }

    const std::string& name() const { return name_; }
    size_t size() const { return index_.size(); }
    bool empty() const { return index_.empty(); }

    int label(size_t i) const { return (*storage_)[index_.at(i)].label; }
    const std::string& sample_id(size_t i) const { return (*storage_)[index_.at(i)].id; }

    const Image& image(size_t i) const {
        const Sample& s = (*storage_)[index_.at(i)];
        if (log_) log_->record(name_, s.id);
        return s.image;
    }

    const std::set<int>& class_inventory() const { return inventory_; }

    std::shared_ptr<AccessLog> access_log() const { return log_; }

    void attach_log(std::shared_ptr<AccessLog> log) { log_ = std::move(log); }

    DomainDataset subset(std::vector<size_t> rows) const {
        DomainDataset d;
        d.name_ = name_;
        d.storage_ = storage_;
        d.log_ = log_;
        d.index_.reserve(rows.size());
        for (size_t r : rows) d.index_.push_back(index_.at(r));
        d.recompute_inventory();
        return d;
    }

private:
    void recompute_inventory() {
        inventory_.clear();
        for (size_t i : index_) inventory_.insert((*storage_)[i].label);
    }

    std::string name_;
    std::shared_ptr<const std::vector<Sample>> storage_;
    std::vector<size_t> index_;
    std::set<int> inventory_;
    std::shared_ptr<AccessLog> log_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Read <root>/<domain_name>/labels.csv ("path,label" header) and decode
/// every referenced image eagerly. expected_k < 0 skips the upper-bound
/// label check (K derived later from the domain union).
inline DomainDataset load_domain(const std::string& root, const std::string& domain_name,
                                 std::shared_ptr<AccessLog> log = nullptr,
                                 int expected_k = -1) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / domain_name;
    const fs::path manifest = dir / "labels.csv";
    if (!fs::exists(manifest))
        throw DataError("missing manifest: " + manifest.string());
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot read manifest: " + manifest.string());

    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "path,label")
        throw DataError("manifest " + manifest.string() +
                        " must start with header \"path,label\"");

    std::vector<Sample> samples;
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const size_t comma = t.find_last_of(',');
        if (comma == std::string::npos)
            throw DataError("manifest row " + std::to_string(row) + ": expected path,label");
        const std::string rel = detail::trim(t.substr(0, comma));
        const std::string lab = detail::trim(t.substr(comma + 1));
        int label = 0;
        try {
            label = std::stoi(lab);
        } catch (const std::exception&) {
            throw DataError("manifest row " + std::to_string(row) + ": bad label \"" + lab +
                            "\"");
        }
        if (label < 0 || (expected_k >= 0 && label >= expected_k))
            throw DataError("manifest row " + std::to_string(row) + " (" + rel + "): label " +
                            std::to_string(label) + " outside [0, " +
                            std::to_string(expected_k) + ")");
        Sample s;
        s.image = read_image((dir / rel).string());
        s.image.domain = domain_name;
        s.image.sample_id = rel;
        s.label = label;
        s.id = rel;
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw DataError("empty domain: " + domain_name);
    return DomainDataset(domain_name, std::move(samples), std::move(log));
}

struct SplitPair {
    DomainDataset train;
    DomainDataset val;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

/// Stratified, seed-deterministic split. Per class, train gets
/// floor(ratio * n_c) then largest-remainder top-ups so the overall train
/// count is round(ratio * n); single-sample classes go to train with a
/// warning.
inline SplitPair split_train_val(const DomainDataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("split: ratio must lie strictly between 0 and 1");
    if (d.empty()) throw DataError("split: empty domain " + d.name());

    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < d.size(); ++i) by_class[d.label(i)].push_back(i);

    RngStream rng = derive_rng(seed, "split/" + d.name());
    SplitPair out;
    out.ratio = ratio;
    out.seed = seed;

    struct ClassPlan {
        int label;
        std::vector<size_t> rows;
        size_t take;
        size_t max_take;
        double remainder;
    };
    std::vector<ClassPlan> plans;
    long long target = std::llround(ratio * static_cast<double>(d.size()));
    long long total = 0;
    for (auto& [label, rows] : by_class) {
        ClassPlan p;
        p.label = label;
        p.rows = rows;
        rng.shuffle(p.rows);
        const double quota = ratio * static_cast<double>(rows.size());
        if (rows.size() == 1) {
            p.take = p.max_take = 1;
            p.remainder = 0.0;
            out.warnings.push_back("class " + std::to_string(label) + " in domain " +
                                   d.name() + " has a single sample; assigned to train");
        } else {
            p.take = std::max<size_t>(1, static_cast<size_t>(std::floor(quota)));
            p.max_take = rows.size() - 1;
            p.take = std::min(p.take, p.max_take);
            p.remainder = quota - std::floor(quota);
        }
        total += static_cast<long long>(p.take);
        plans.push_back(std::move(p));
    }
    std::vector<size_t> order(plans.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (plans[a].remainder != plans[b].remainder)
            return plans[a].remainder > plans[b].remainder;
        return plans[a].label < plans[b].label;
    });
    for (size_t i : order) {
        if (total >= target) break;
        if (plans[i].take < plans[i].max_take) {
            ++plans[i].take;
            ++total;
        }
    }

    std::vector<size_t> train_rows, val_rows;
    for (const ClassPlan& p : plans) {
        for (size_t i = 0; i < p.rows.size(); ++i)
            (i < p.take ? train_rows : val_rows).push_back(p.rows[i]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    out.train = d.subset(train_rows);
    out.val = d.subset(val_rows);
    return out;
}

}  // namespace vldg
