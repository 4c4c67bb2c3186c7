#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vldg/core.hpp"
#include "vldg/optim_param.hpp"

namespace vldg {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay and bias correction. Keeps first and
/// second moment estimates keyed by parameter name so state survives
/// serialization round trips.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    long step_count() const { return step_; }

    void step(const std::vector<Param*>& params) {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (Param* p : params) {
            if (!p->trainable) continue;
            Slot& s = slot(*p);
            const bool has_grad = p->grad.numel() != 0;
            for (size_t i = 0; i < p->value.numel(); ++i) {
                const double g = has_grad ? p->grad[i] : 0.0;
                s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
                s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
                const double mh = s.m[i] / bc1;
                const double vh = s.v[i] / bc2;
                p->value[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) +
                                          cfg_.weight_decay * p->value[i]);
            }
            p->zero_grad();
        }
    }

    struct Slot {
        Tensor m;
        Tensor v;
    };

    const std::map<std::string, Slot>& state() const { return state_; }
    std::map<std::string, Slot>& state() { return state_; }
    void set_step_count(long s) { step_ = s; }

private:
    Slot& slot(Param& p) {
        auto [it, inserted] = state_.try_emplace(p.name);
        Slot& s = it->second;
        if (inserted || !s.m.same_shape(p.value)) {
            s.m = Tensor::zeros(p.value.shape());
            s.v = Tensor::zeros(p.value.shape());
        }
        return s;
    }

    AdamWConfig cfg_;
    long step_ = 0;
    std::map<std::string, Slot> state_;
};

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

}  // namespace vldg
