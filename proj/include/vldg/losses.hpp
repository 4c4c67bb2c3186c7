#pragma once

#include <vector>

#include "vldg/autodiff.hpp"
#include "vldg/tensor.hpp"

namespace vldg {

/// Mean cross entropy over the batch; logits B x K.
inline Var ce_loss(Var logits, const std::vector<int>& labels) {
    return cross_entropy_mean(logits, labels);
}

/// Similarity argmax over classes; ties go to the lowest class index.
inline std::vector<int> zero_shot_classify(const Tensor& v, const Tensor& t) {
    if (v.rank() != 2 || t.rank() != 2 || v.cols() != t.cols())
        throw Error("zero_shot_classify: feature width mismatch (" + v.shape_string() +
                    " vs " + t.shape_string() + ")");
    Tensor sim = matmul(v, transpose(t));
    std::vector<int> preds(sim.rows());
    for (size_t i = 0; i < sim.rows(); ++i) {
        size_t best = 0;
        for (size_t k = 1; k < sim.cols(); ++k)
            if (sim(i, k) > sim(i, best)) best = k;
        preds[i] = static_cast<int>(best);
    }
    return preds;
}

/// Cross entropy on scaled similarities against the fixed class-prompt
/// features T (K rows). scale_exp is exp(s), a scalar Var.
inline Var naive_mm_loss(Var v, Var t_classes, const std::vector<int>& labels, Var scale_exp) {
    Var logits = mul_scalar(matmul(v, transpose(t_classes)), scale_exp);
    return ce_loss(logits, labels);
}

/// Symmetric InfoNCE with diagonal positives: softmax over each row of the
/// scaled similarity matrix plus softmax over each column, both averaged.
inline Var cooplvt_contrastive_loss(Var v, Var t_batch, Var scale_exp) {
    const size_t b = v.value().rows();
    if (t_batch.value().rows() != b)
        throw Error("contrastive loss: V and T_batch must pair row-for-row (got " +
                    v.value().shape_string() + " vs " + t_batch.value().shape_string() + ")");
    Var m = mul_scalar(matmul(v, transpose(t_batch)), scale_exp);
    std::vector<int> diagonal(b);
    for (size_t j = 0; j < b; ++j) diagonal[j] = static_cast<int>(j);
    Var l_text = cross_entropy_mean(m, diagonal);
    Var l_visual = cross_entropy_mean(transpose(m), diagonal);
    return add(l_text, l_visual);
}

}  // namespace vldg
