#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace omnivl {

using i64 = int64_t;

// Dense row-major double tensor. Double precision everywhere: the whole
// artifact is desk-scale and the gradient checks are specified on float64.
struct Tensor {
    std::vector<i64> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<i64> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), 0.0);
    }
    Tensor(std::vector<i64> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<i64>(data.size()) != count(shape))
            throw ShapeError("tensor data size does not match shape");
    }

    static i64 count(const std::vector<i64>& s) {
        i64 n = 1;
        for (i64 d : s) n *= d;
        return n;
    }

    i64 numel() const { return static_cast<i64>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    i64 dim(int i) const { return shape[static_cast<size_t>(i)]; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    // Treat the tensor as [rows, cols] with cols = last dimension.
    i64 last_dim() const { return shape.empty() ? 1 : shape.back(); }
    i64 rows() const { return last_dim() == 0 ? 0 : numel() / last_dim(); }

    static Tensor zeros(std::vector<i64> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<i64> s, double v) {
        Tensor t(std::move(s));
        for (double& x : t.data) x = v;
        return t;
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace omnivl
