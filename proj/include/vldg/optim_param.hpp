#pragma once

#include <string>

#include "vldg/tensor.hpp"

namespace vldg {

/// A named tensor that may be updated by an optimizer. grad is accumulated
/// by Tape::backward and cleared by the optimizer (or zero_grad).
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), trainable(train) {}

    void zero_grad() { grad = Tensor(); }
};

}  // namespace vldg
