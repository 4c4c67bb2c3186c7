#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vldg/autodiff.hpp"
#include "vldg/rng.hpp"
#include "vldg/tensor.hpp"

namespace testutil {

/// Central finite differences against tape gradients. make_loss builds the
/// scalar loss on the given tape from the current param values; it must be
/// pure in those values. Returns the max relative error over the checked
/// coordinates (all coordinates unless coords_per_param > 0).
template <class MakeLoss>
double fd_max_rel_err(const std::vector<vldg::Param*>& params, MakeLoss make_loss,
                      vldg::RngStream* pick = nullptr, int coords_per_param = -1,
                      double h = 1e-5) {
    std::vector<vldg::Tensor> analytic;
    {
        vldg::Tape t;
        vldg::Var loss = make_loss(t);
        t.backward(loss);
        for (vldg::Param* p : params)
            analytic.push_back(p->grad.numel() ? p->grad : vldg::Tensor::zeros(p->value.shape()));
        for (vldg::Param* p : params) p->zero_grad();
    }
    auto eval = [&]() {
        vldg::Tape t;
        return make_loss(t).value()[0];
    };
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        vldg::Param& p = *params[pi];
        std::vector<size_t> coords;
        if (coords_per_param > 0 && pick) {
            for (int c = 0; c < coords_per_param; ++c)
                coords.push_back(pick->next_below(p.value.numel()));
        } else {
            coords.resize(p.value.numel());
            for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        }
        for (size_t i : coords) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = eval();
            p.value[i] = saved - h;
            const double dn = eval();
            p.value[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double g = analytic[pi][i];
            const double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
            max_rel = std::max(max_rel, std::abs(fd - g) / denom);
        }
        for (vldg::Param* q : params) q->zero_grad();
    }
    return max_rel;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (stem + "-" + std::to_string(rd()) + "-" + std::to_string(rd() % 9973));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
