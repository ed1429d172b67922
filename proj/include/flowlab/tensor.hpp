#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowlab {

// Dense row-major tensor of 64-bit reals. Shapes are small (toy scale), so
// everything is plain std::vector with bounds handled by the callers.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(numel_of(shape), fill) {}

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D access for weight matrices, shape = {rows, cols}.
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline void check_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(what + ": shape mismatch (" +
                                    std::to_string(a.numel()) + " vs " +
                                    std::to_string(b.numel()) + " elements)");
    }
}

inline void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data) {
        if (!std::isfinite(v)) throw std::runtime_error(what + ": non-finite value");
    }
}

inline bool all_finite(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    check_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += alpha * x[i];
}

inline double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    return std::inner_product(a.data.begin(), a.data.end(), b.data.begin(), 0.0);
}

inline double sq_norm(const Tensor& a) { return dot(a, a); }
inline double norm(const Tensor& a) { return std::sqrt(sq_norm(a)); }

// (value, tangent) pair for forward-mode directional derivatives.
struct DualTensor {
    Tensor value;
    Tensor tangent;

    DualTensor() = default;
    DualTensor(Tensor v, Tensor t) : value(std::move(v)), tangent(std::move(t)) {
        check_same_shape(value, tangent, "DualTensor");
    }
};

}  // namespace flowlab
