// AVX2 kernel variants. Built with -mavx2 only on x86-64; the dispatcher
// checks cpu support at runtime before handing these out.
//
// Multiplies and adds are issued as separate instructions (no FMA) so each
// lane rounds exactly like the scalar reference; equivalence tests assert
// bit-identical output.

#include "cmr/kernels.hpp"

#if defined(CMR_BUILD_AVX2)

#include <immintrin.h>

namespace cmr::kernels {

namespace {

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(std::size_t n, const double* x, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, vx));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void scale_avx2(std::size_t n, double a, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_mul_pd(vy, va));
    }
    for (; i < n; ++i) y[i] *= a;
}

void norm_affine_avx2(std::size_t n, const double* x, double mu, double inv_sigma,
                      const double* gain, const double* bias, double* y) {
    const __m256d vmu = _mm256_set1_pd(mu);
    const __m256d vs = _mm256_set1_pd(inv_sigma);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vg = _mm256_loadu_pd(gain + i);
        const __m256d vb = _mm256_loadu_pd(bias + i);
        const __m256d centered = _mm256_mul_pd(_mm256_sub_pd(vx, vmu), vs);
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_mul_pd(centered, vg), vb));
    }
    for (; i < n; ++i) y[i] = (x[i] - mu) * inv_sigma * gain[i] + bias[i];
}

}  // namespace

const Ops* avx2_ops_impl() {
    static const Ops ops{axpy_avx2, add_avx2, scale_avx2, norm_affine_avx2, "avx2"};
    return &ops;
}

}  // namespace cmr::kernels

#endif  // CMR_BUILD_AVX2
