#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "cmr/errors.hpp"

namespace cmr {

class Rng;

// Dense row-major tensor of 64-bit reals, up to 4 axes. Value type: copy and
// share freely, no op mutates its inputs.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double value);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t numel() const { return data.size(); }
    int extent(int axis) const { return shape[static_cast<std::size_t>(axis)]; }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j);
    double at(int i, int j) const;
    double& at(int i, int j, int k);
    double at(int i, int j, int k) const;
    double& at(int i, int j, int k, int l);
    double at(int i, int j, int k, int l) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

std::string shape_str(const std::vector<int>& shape);

// Elementwise helpers shared across modules.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// --- tensor core operations -------------------------------------------------

// Standard matrix product, deterministic accumulation order (inner index
// ascending for every output element).
Tensor matmul(const Tensor& a, const Tensor& b);

// Row-stabilized softmax over the last axis of an m x n matrix.
Tensor softmax_rows(const Tensor& x, double temperature);

// 2-D convolution, input H x W x Cin, kernel kh x kw x Cin x Cout, zero
// padding. Output floor((H + 2 pad - kh) / stride) + 1 likewise for W.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

// Normalizes over the last axis (length C), then applies per-channel affine.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Exact erf-based GELU: x * Phi(x).
Tensor gelu(const Tensor& x);
double gelu_scalar(double x);

// 2x2 average pooling with stride 2 over an H x W x C map (H, W even).
Tensor avg_pool2x2(const Tensor& x);

// Scaled-uniform fan-in initializer: entries uniform in
// (-1/sqrt(fan_in), +1/sqrt(fan_in)), drawn in row-major order.
Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace cmr
