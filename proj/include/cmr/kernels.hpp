#pragma once

#include <cstddef>

namespace cmr::kernels {

// Inner-loop kernel table. Every variant must produce bit-identical results
// to the scalar reference: identical per-element operation order, no fused
// multiply-add, no reassociation of reductions. Reductions therefore stay
// scalar; only lane-independent loops are vectorized.
struct Ops {
    // y[i] += a * x[i]
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    // y[i] += x[i]
    void (*add)(std::size_t n, const double* x, double* y);
    // y[i] *= a
    void (*scale)(std::size_t n, double a, double* y);
    // y[i] = (x[i] - mu) * inv_sigma * gain[i] + bias[i]
    void (*norm_affine)(std::size_t n, const double* x, double mu, double inv_sigma,
                        const double* gain, const double* bias, double* y);
    const char* name;
};

const Ops& scalar_ops();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const Ops* avx2_ops();

// Selected once per process: AVX2 when available, else scalar. The
// CMR_KERNELS environment variable ("scalar" | "avx2") forces a variant;
// forcing an unavailable one falls back to scalar.
const Ops& active_ops();

}  // namespace cmr::kernels
