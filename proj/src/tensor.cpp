#include "cmr/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cmr/kernels.hpp"
#include "cmr/rng.hpp"

namespace cmr {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 4)
        throw DimensionError("tensor rank must be 1..4, got " + shape_str(shape));
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("non-positive extent in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << 'x';
        out << shape[i];
    }
    out << ')';
    return out.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_numel(shape) != data.size())
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
}

Tensor Tensor::full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = value;
    return t;
}

std::string Tensor::shape_str() const { return cmr::shape_str(shape); }

double& Tensor::at(int i, int j) {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}
double Tensor::at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}
double& Tensor::at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}
double Tensor::at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}
double& Tensor::at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
}
double Tensor::at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    kernels::active_ops().add(a.numel(), b.data.data(), a.data.data());
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out = a;
    kernels::active_ops().scale(out.numel(), factor, out.data.data());
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul: need rank-2 operands, got " + a.shape_str() + " and " +
                             b.shape_str());
    if (a.shape[1] != b.shape[0])
        throw DimensionError("matmul: inner extents differ: " + a.shape_str() + " vs " +
                             b.shape_str());
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c({m, n});
    const auto& ops = kernels::active_ops();
    for (int i = 0; i < m; ++i) {
        double* c_row = c.data.data() + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double a_il = a.at(i, l);
            if (a_il == 0.0) continue;
            ops.axpy(static_cast<std::size_t>(n), a_il,
                     b.data.data() + static_cast<std::size_t>(l) * n, c_row);
        }
    }
    return c;
}

Tensor softmax_rows(const Tensor& x, double temperature) {
    if (x.rank() != 2)
        throw DimensionError("softmax_rows: need rank-2 input, got " + x.shape_str());
    if (!(temperature > 0.0))
        throw ParameterError("softmax_rows: temperature must be positive, got " +
                             std::to_string(temperature));
    const int m = x.shape[0], n = x.shape[1];
    Tensor out({m, n});
    const auto& ops = kernels::active_ops();
    for (int i = 0; i < m; ++i) {
        const double* row = x.data.data() + static_cast<std::size_t>(i) * n;
        double* orow = out.data.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp((row[j] - mx) / temperature);
            sum += orow[j];
        }
        ops.scale(static_cast<std::size_t>(n), 1.0 / sum, orow);
    }
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    if (input.rank() != 3)
        throw DimensionError("conv2d: input must be HxWxC, got " + input.shape_str());
    if (kernel.rank() != 4)
        throw DimensionError("conv2d: kernel must be khxkwxCinxCout, got " + kernel.shape_str());
    if (stride <= 0) throw ParameterError("conv2d: stride must be positive");
    if (pad < 0) throw ParameterError("conv2d: pad must be non-negative");
    const int h = input.shape[0], w = input.shape[1], cin = input.shape[2];
    const int kh = kernel.shape[0], kw = kernel.shape[1];
    if (kernel.shape[2] != cin)
        throw DimensionError("conv2d: kernel input channels " + kernel.shape_str() +
                             " do not match input " + input.shape_str());
    const int cout = kernel.shape[3];
    if (h + 2 * pad < kh || w + 2 * pad < kw)
        throw DimensionError("conv2d: kernel " + kernel.shape_str() +
                             " larger than padded input " + input.shape_str() + " with pad " +
                             std::to_string(pad));
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    Tensor out({oh, ow, cout});
    const auto& ops = kernels::active_ops();
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double* acc = out.data.data() + (static_cast<std::size_t>(oy) * ow + ox) * cout;
            for (int ky = 0; ky < kh; ++ky) {
                const int y = oy * stride + ky - pad;
                if (y < 0 || y >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int x = ox * stride + kx - pad;
                    if (x < 0 || x >= w) continue;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = input.at(y, x, ci);
                        if (v == 0.0) continue;
                        const double* krow =
                            kernel.data.data() +
                            ((static_cast<std::size_t>(ky) * kw + kx) * cin + ci) * cout;
                        ops.axpy(static_cast<std::size_t>(cout), v, krow, acc);
                    }
                }
            }
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
    const int c = x.shape.back();
    if (gain.rank() != 1 || gain.shape[0] != c || bias.rank() != 1 || bias.shape[0] != c)
        throw DimensionError("layer_norm: gain " + gain.shape_str() + " / bias " +
                             bias.shape_str() + " do not match channel count " +
                             std::to_string(c));
    Tensor out(x.shape);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
    const auto& ops = kernels::active_ops();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = x.data.data() + r * c;
        double* orow = out.data.data() + r * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= c;
        const double inv_sigma = 1.0 / std::sqrt(var + eps);
        ops.norm_affine(static_cast<std::size_t>(c), row, mean, inv_sigma, gain.data.data(),
                        bias.data.data(), orow);
    }
    return out;
}

double gelu_scalar(double x) {
    return x * 0.5 * (1.0 + std::erf(x * 0.70710678118654752440));
}

Tensor gelu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = gelu_scalar(v);
    return out;
}

Tensor avg_pool2x2(const Tensor& x) {
    if (x.rank() != 3)
        throw DimensionError("avg_pool2x2: input must be HxWxC, got " + x.shape_str());
    const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("avg_pool2x2: extents must be even, got " + x.shape_str());
    Tensor out({h / 2, w / 2, c});
    for (int y = 0; y < h / 2; ++y)
        for (int x2 = 0; x2 < w / 2; ++x2)
            for (int ch = 0; ch < c; ++ch)
                out.at(y, x2, ch) = 0.25 * (x.at(2 * y, 2 * x2, ch) + x.at(2 * y, 2 * x2 + 1, ch) +
                                            x.at(2 * y + 1, 2 * x2, ch) +
                                            x.at(2 * y + 1, 2 * x2 + 1, ch));
    return out;
}

Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw ParameterError("init_uniform: fan_in must be positive");
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace cmr
