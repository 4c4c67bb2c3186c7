#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vldg/core.hpp"
#include "vldg/dataset.hpp"
#include "vldg/rng.hpp"

namespace vldg {

/// Domain-major training batch: b samples from each source domain, in
/// source order, B = b * d_tr total.
struct DgBatch {
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<std::string> domain_of;

    size_t size() const { return labels.size(); }
};

/// Per-domain balanced batch stream. Within every domain: a shuffled pass
/// over all samples, reshuffled each epoch, so small domains cycle. The
/// optional pipeline (augment + resize/normalize) runs per emitted image
/// with a stream-owned RNG.
class DgBatchStream {
public:
    using Pipeline = std::function<Image(const Image&, RngStream&)>;

    DgBatchStream(std::vector<const DomainDataset*> sources, int b, std::uint64_t seed,
                  Pipeline pipeline = {})
        : sources_(std::move(sources)),
          b_(b),
          pipeline_(std::move(pipeline)),
          pipe_rng_(derive_rng(seed, "sampler/pipeline")) {
        if (b_ < 1) throw ConfigError("batch stream: b must be >= 1");
        if (sources_.empty()) throw ConfigError("batch stream: no source domains");
        for (const DomainDataset* d : sources_) {
            if (!d || d->empty())
                throw DataError("batch stream: empty source domain");
            cursors_.push_back(Cursor{derive_rng(seed, "sampler/" + d->name()), {}, 0});
        }
    }

    int per_domain() const { return b_; }
    size_t total_batch() const { return static_cast<size_t>(b_) * sources_.size(); }

    DgBatch next() {
        DgBatch batch;
        batch.images.reserve(total_batch());
        batch.labels.reserve(total_batch());
        batch.domain_of.reserve(total_batch());
        for (size_t s = 0; s < sources_.size(); ++s) {
            const DomainDataset& d = *sources_[s];
            Cursor& cur = cursors_[s];
            for (int i = 0; i < b_; ++i) {
                if (cur.pos >= cur.order.size()) {
                    cur.order.resize(d.size());
                    for (size_t j = 0; j < d.size(); ++j) cur.order[j] = j;
                    cur.rng.shuffle(cur.order);
                    cur.pos = 0;
                }
                const size_t row = cur.order[cur.pos++];
                const Image& raw = d.image(row);
                batch.images.push_back(pipeline_ ? pipeline_(raw, pipe_rng_) : raw);
                batch.labels.push_back(d.label(row));
                batch.domain_of.push_back(d.name());
            }
        }
        return batch;
    }

private:
    struct Cursor {
        RngStream rng;
        std::vector<size_t> order;
        size_t pos;
    };

    std::vector<const DomainDataset*> sources_;
    int b_;
    Pipeline pipeline_;
    RngStream pipe_rng_;
    std::vector<Cursor> cursors_;
};

}  // namespace vldg
