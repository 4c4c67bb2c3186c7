#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "vldg/optim_param.hpp"
#include "vldg/tensor.hpp"

namespace vldg {

class Tape;

/// Handle into a Tape node. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
};

/// Reverse-mode tape. Forward runs eagerly as ops are recorded; backward()
/// walks the nodes in reverse and accumulates gradients into trainable
/// Params bound via leaf().
class Tape {
public:
    Var leaf(Param& p) {
        int id = add_node(p.value, p.trainable);
        nodes_[static_cast<size_t>(id)].param = &p;
        return Var{this, id};
    }

    Var constant(Tensor v) { return Var{this, add_node(std::move(v), false)}; }
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }

    /// Gradient of the last backward() target w.r.t. this node. Zeros if the
    /// node was not on the path.
    Tensor grad_of(Var v) const {
        const Node& n = nodes_[static_cast<size_t>(v.id)];
        return n.grad.numel() ? n.grad : Tensor::zeros(n.value.shape());
    }

    void backward(Var loss) {
        Node& top = nodes_[static_cast<size_t>(loss.id)];
        if (top.value.numel() != 1) throw Error("backward: loss must be scalar");
        grad_ref(loss.id) = Tensor::scalar(1.0);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (!n.requires_grad || n.grad.numel() == 0) continue;
            if (n.backprop) n.backprop();
            if (n.param && n.param->trainable) {
                if (n.param->grad.numel() == 0) n.param->grad = Tensor::zeros(n.value.shape());
                axpy(1.0, n.grad, n.param->grad);
            }
        }
    }

    // Low-level node interface for the op library below.
    int add_node(Tensor value, bool requires_grad,
                 std::function<void()> backprop = nullptr) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    Tensor& grad_ref(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape());
        return n.grad;
    }

    bool has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad.numel() != 0; }

    void set_backprop(int id, std::function<void()> fn) {
        nodes_[static_cast<size_t>(id)].backprop = std::move(fn);
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Param* param = nullptr;
        std::function<void()> backprop;
    };

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

namespace detail {

inline Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw Error("autodiff: mixing variables from different tapes");
    return *a.tape;
}

/// Record a node whose backward is only attached if some input needs grads.
template <class Backward>
Var record(Tape& t, Tensor value, bool needs, Backward bw) {
    int id = t.add_node(std::move(value), needs);
    if (needs) t.set_backprop(id, [&t, id, bw]() { bw(t, id); });
    return Var{&t, id};
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    Tensor out = matmul(a.value(), b.value());
    bool needs = t.requires_grad(a.id) || t.requires_grad(b.id);
    int ai = a.id, bi = b.id;
    return detail::record(t, std::move(out), needs, [ai, bi](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& av = tp.value(Var{&tp, ai});
        const Tensor& bv = tp.value(Var{&tp, bi});
        if (tp.requires_grad(ai)) axpy(1.0, matmul(g, transpose(bv)), tp.grad_ref(ai));
        if (tp.requires_grad(bi)) axpy(1.0, matmul(transpose(av), g), tp.grad_ref(bi));
    });
}

inline Var transpose(Var a) {
    Tape& t = *a.tape;
    bool needs = t.requires_grad(a.id);
    int ai = a.id;
    return detail::record(t, transpose(a.value()), needs, [ai](Tape& tp, int id) {
        axpy(1.0, transpose(tp.grad_ref(id)), tp.grad_ref(ai));
    });
}

inline Var add(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw Error("add: shape mismatch");
    Tensor out = a.value();
    axpy(1.0, b.value(), out);
    bool needs = t.requires_grad(a.id) || t.requires_grad(b.id);
    int ai = a.id, bi = b.id;
    return detail::record(t, std::move(out), needs, [ai, bi](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        if (tp.requires_grad(ai)) axpy(1.0, g, tp.grad_ref(ai));
        if (tp.requires_grad(bi)) axpy(1.0, g, tp.grad_ref(bi));
    });
}

/// a[m,n] + row vector v (shape [n] or [1,n]) broadcast over rows.
inline Var add_rowvec(Var a, Var v) {
    Tape& t = detail::same_tape(a, v);
    const Tensor& av = a.value();
    const Tensor& vv = v.value();
    if (av.rank() != 2 || vv.numel() != av.cols()) throw Error("add_rowvec: shape mismatch");
    Tensor out = av;
    for (size_t i = 0; i < av.rows(); ++i)
        for (size_t j = 0; j < av.cols(); ++j) out(i, j) += vv[j];
    bool needs = t.requires_grad(a.id) || t.requires_grad(v.id);
    int ai = a.id, vi = v.id;
    return detail::record(t, std::move(out), needs, [ai, vi](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        if (tp.requires_grad(ai)) axpy(1.0, g, tp.grad_ref(ai));
        if (tp.requires_grad(vi)) {
            Tensor& gv = tp.grad_ref(vi);
            for (size_t i = 0; i < g.rows(); ++i)
                for (size_t j = 0; j < g.cols(); ++j) gv[j] += g(i, j);
        }
    });
}

inline Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id), [ai, c](Tape& tp, int id) {
        axpy(c, tp.grad_ref(id), tp.grad_ref(ai));
    });
}

/// Elementwise product with a scalar variable s (shape [1]).
inline Var mul_scalar(Var a, Var s) {
    Tape& t = detail::same_tape(a, s);
    if (s.value().numel() != 1) throw Error("mul_scalar: s must be scalar");
    const double sv = s.value()[0];
    Tensor out = a.value();
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    bool needs = t.requires_grad(a.id) || t.requires_grad(s.id);
    int ai = a.id, si = s.id;
    return detail::record(t, std::move(out), needs, [ai, si, sv](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        if (tp.requires_grad(ai)) axpy(sv, g, tp.grad_ref(ai));
        if (tp.requires_grad(si)) {
            const Tensor& av = tp.value(Var{&tp, ai});
            double acc = 0.0;
            for (size_t i = 0; i < g.numel(); ++i) acc += g[i] * av[i];
            tp.grad_ref(si)[0] += acc;
        }
    });
}

inline Var exp(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id), [ai](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& y = tp.value(Var{&tp, id});
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i];
    });
}

inline Var tanh(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id), [ai](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& y = tp.value(Var{&tp, id});
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

inline Var relu(Var a) {
    Tape& t = *a.tape;
    Tensor out = a.value();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id), [ai](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& x = tp.value(Var{&tp, ai});
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.numel(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

/// Normalize each row of a [m,n] matrix to unit Euclidean norm.
/// Zero-norm rows are an error, not a silent epsilon.
inline Var row_normalize(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() != 2) throw Error("row_normalize: expected rank-2");
    Tensor out = av;
    std::vector<double> norms(av.rows());
    for (size_t i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (size_t j = 0; j < av.cols(); ++j) s += av(i, j) * av(i, j);
        double r = std::sqrt(s);
        if (r < 1e-12)
            throw Error("row_normalize: row " + std::to_string(i) + " has zero norm");
        norms[i] = r;
        for (size_t j = 0; j < av.cols(); ++j) out(i, j) /= r;
    }
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id),
                          [ai, norms](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& y = tp.value(Var{&tp, id});
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
            for (size_t j = 0; j < g.cols(); ++j)
                ga(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
        }
    });
}

inline Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() != 2) throw Error("softmax_rows: expected rank-2");
    Tensor out = av;
    for (size_t i = 0; i < av.rows(); ++i) {
        double m = out(i, 0);
        for (size_t j = 1; j < av.cols(); ++j) m = std::max(m, out(i, j));
        double z = 0.0;
        for (size_t j = 0; j < av.cols(); ++j) {
            out(i, j) = std::exp(out(i, j) - m);
            z += out(i, j);
        }
        for (size_t j = 0; j < av.cols(); ++j) out(i, j) /= z;
    }
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id), [ai](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        const Tensor& y = tp.value(Var{&tp, id});
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
            for (size_t j = 0; j < g.cols(); ++j)
                ga(i, j) += y(i, j) * (g(i, j) - dot);
        }
    });
}

/// Mean over rows of -log softmax(logits)[label]. Numerically stable.
inline Var cross_entropy_mean(Var logits, const std::vector<int>& labels) {
    Tape& t = *logits.tape;
    const Tensor& lv = logits.value();
    if (lv.rank() != 2) throw Error("cross_entropy_mean: logits must be rank-2");
    const size_t m = lv.rows(), k = lv.cols();
    if (labels.size() != m) throw Error("cross_entropy_mean: labels size mismatch");
    for (int y : labels)
        if (y < 0 || static_cast<size_t>(y) >= k)
            throw Error("cross_entropy_mean: label " + std::to_string(y) +
                        " out of range [0, " + std::to_string(k) + ")");
    if (!lv.all_finite()) throw Error("cross_entropy_mean: non-finite logits");

    Tensor probs({m, k});
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
        double mx = lv(i, 0);
        for (size_t j = 1; j < k; ++j) mx = std::max(mx, lv(i, j));
        double z = 0.0;
        for (size_t j = 0; j < k; ++j) {
            probs(i, j) = std::exp(lv(i, j) - mx);
            z += probs(i, j);
        }
        double lse = std::log(z) + mx;
        total += lse - lv(i, static_cast<size_t>(labels[i]));
        for (size_t j = 0; j < k; ++j) probs(i, j) /= z;
    }
    int li = logits.id;
    return detail::record(t, Tensor::scalar(total / static_cast<double>(m)),
                          t.requires_grad(logits.id),
                          [li, probs, labels](Tape& tp, int id) {
        const double g = tp.grad_ref(id)[0];
        Tensor& gl = tp.grad_ref(li);
        const double inv_m = 1.0 / static_cast<double>(probs.rows());
        for (size_t i = 0; i < probs.rows(); ++i)
            for (size_t j = 0; j < probs.cols(); ++j) {
                double p = probs(i, j) - (static_cast<size_t>(labels[i]) == j ? 1.0 : 0.0);
                gl(i, j) += g * inv_m * p;
            }
    });
}

/// Stack rank-2 blocks with equal column counts.
inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_rows: no parts");
    Tape& t = *parts[0].tape;
    size_t cols = parts[0].value().cols();
    size_t rows = 0;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.tape != &t) throw Error("concat_rows: mixed tapes");
        if (p.value().rank() != 2 || p.value().cols() != cols)
            throw Error("concat_rows: column mismatch");
        rows += p.value().rows();
        needs = needs || t.requires_grad(p.id);
    }
    Tensor out({rows, cols});
    size_t r = 0;
    std::vector<std::pair<int, std::pair<size_t, size_t>>> spans;  // id -> (row0, nrows)
    for (const Var& p : parts) {
        const Tensor& pv = p.value();
        std::copy(pv.data(), pv.data() + pv.numel(), out.data() + r * cols);
        spans.push_back({p.id, {r, pv.rows()}});
        r += pv.rows();
    }
    return detail::record(t, std::move(out), needs, [spans, cols](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        for (const auto& [pid, span] : spans) {
            if (!tp.requires_grad(pid)) continue;
            Tensor& gp = tp.grad_ref(pid);
            for (size_t i = 0; i < span.second; ++i)
                for (size_t j = 0; j < cols; ++j)
                    gp(i, j) += g(span.first + i, j);
        }
    });
}

/// Rows [row0, row0 + nrows) of a rank-2 tensor.
inline Var slice_rows(Var a, size_t row0, size_t nrows) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.rank() != 2 || row0 + nrows > av.rows()) throw Error("slice_rows: out of range");
    const size_t cols = av.cols();
    Tensor out({nrows, cols});
    std::copy(av.data() + row0 * cols, av.data() + (row0 + nrows) * cols, out.data());
    int ai = a.id;
    return detail::record(t, std::move(out), t.requires_grad(a.id),
                          [ai, row0, cols](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < g.rows(); ++i)
            for (size_t j = 0; j < cols; ++j) ga(row0 + i, j) += g(i, j);
    });
}

/// Embedding lookup: out[i] = table[indices[i]]. Backward scatter-adds.
inline Var gather_rows(Var table, const std::vector<int>& indices) {
    Tape& t = *table.tape;
    const Tensor& tv = table.value();
    if (tv.rank() != 2) throw Error("gather_rows: table must be rank-2");
    const size_t cols = tv.cols();
    Tensor out({indices.size(), cols});
    for (size_t i = 0; i < indices.size(); ++i) {
        int ix = indices[i];
        if (ix < 0 || static_cast<size_t>(ix) >= tv.rows())
            throw Error("gather_rows: index out of range");
        std::copy(tv.data() + static_cast<size_t>(ix) * cols,
                  tv.data() + (static_cast<size_t>(ix) + 1) * cols, out.data() + i * cols);
    }
    int ti = table.id;
    return detail::record(t, std::move(out), t.requires_grad(table.id),
                          [ti, indices, cols](Tape& tp, int id) {
        const Tensor& g = tp.grad_ref(id);
        Tensor& gt = tp.grad_ref(ti);
        for (size_t i = 0; i < indices.size(); ++i)
            for (size_t j = 0; j < cols; ++j)
                gt(static_cast<size_t>(indices[i]), j) += g(i, j);
    });
}

inline Var reshape(Var a, std::vector<size_t> new_shape) {
    Tape& t = *a.tape;
    Tensor out = a.value().reshaped(new_shape);
    int ai = a.id;
    auto old_shape = a.value().shape();
    return detail::record(t, std::move(out), t.requires_grad(a.id),
                          [ai, old_shape](Tape& tp, int id) {
        axpy(1.0, tp.grad_ref(id).reshaped(old_shape), tp.grad_ref(ai));
    });
}

inline Var mean_all(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = a.value();
    if (av.numel() == 0) throw Error("mean_all: empty tensor");
    double s = 0.0;
    for (size_t i = 0; i < av.numel(); ++i) s += av[i];
    const double inv = 1.0 / static_cast<double>(av.numel());
    int ai = a.id;
    return detail::record(t, Tensor::scalar(s * inv), t.requires_grad(a.id),
                          [ai, inv](Tape& tp, int id) {
        const double g = tp.grad_ref(id)[0];
        Tensor& ga = tp.grad_ref(ai);
        for (size_t i = 0; i < ga.numel(); ++i) ga[i] += g * inv;
    });
}

}  // namespace vldg
