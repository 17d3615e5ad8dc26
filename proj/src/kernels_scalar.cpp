#include "cmr/kernels.hpp"

namespace cmr::kernels {

namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale_scalar(std::size_t n, double a, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void norm_affine_scalar(std::size_t n, const double* x, double mu, double inv_sigma,
                        const double* gain, const double* bias, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mu) * inv_sigma * gain[i] + bias[i];
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{axpy_scalar, add_scalar, scale_scalar, norm_affine_scalar, "scalar"};
    return ops;
}

}  // namespace cmr::kernels
