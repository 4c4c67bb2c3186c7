#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "vldg/core.hpp"
#include "vldg/rng.hpp"

namespace vldg {

/// Dense row-major tensor of doubles. Small and value-semantic; every shape
/// used in this library is at most rank 4.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw Error("Tensor: data size " + std::to_string(data_.size()) +
                        " does not match shape (" + shape_string() + ")");
    }

    static Tensor zeros(std::vector<size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<size_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor randn(std::vector<size_t> shape, RngStream& rng, double sigma = 1.0) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = rng.normal(0.0, sigma);
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t numel() const { return data_.size(); }
    size_t dim(size_t i) const { return shape_.at(i); }

    size_t rows() const { return rank() == 2 ? shape_[0] : throw_rank2(); }
    size_t cols() const { return rank() == 2 ? shape_[1] : throw_rank2(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& operator()(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor reshaped(std::vector<size_t> new_shape) const {
        if (count(new_shape) != numel())
            throw Error("Tensor::reshaped: element count mismatch");
        return Tensor(std::move(new_shape), data_);
    }

    std::string shape_string() const {
        std::string s;
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static size_t count(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }
    size_t throw_rank2() const {
        throw Error("Tensor: expected rank-2, got rank " + std::to_string(rank()));
    }

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw Error("matmul: incompatible shapes (" + a.shape_string() + ") x (" +
                    b.shape_string() + ")");
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw Error("transpose: expected rank-2");
    Tensor t({a.cols(), a.rows()});
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) throw Error("axpy: shape mismatch");
    for (size_t i = 0; i < y.numel(); ++i) y[i] += alpha * x[i];
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           (a.numel() == 0 ||
            std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0);
}

inline bool allclose(const Tensor& a, const Tensor& b, double atol = 1e-9) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.numel(); ++i)
        if (std::abs(a[i] - b[i]) > atol) return false;
    return true;
}

/// FNV over the raw bytes; used for frozen-weight contracts.
inline std::uint64_t tensor_bits_hash(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
    for (size_t i = 0; i < t.numel() * sizeof(double); ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    for (size_t d : t.shape()) {
        h ^= d;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace vldg
