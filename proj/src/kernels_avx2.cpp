// AVX2 lane. Compiled with -mavx2 on x86-64 only; callers reach it through the
// dispatch table after a cpuid check.

#include "opencap/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace opencap::kern {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum(acc) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void matvec_avx2(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void matvec_t_avx2(const double* w, const double* d, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(d[r], w + r * cols, out, cols);
}

void outer_acc_avx2(const double* d, const double* x, double* g, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(d[r], x, g + r * cols, cols);
}

void adam_update_avx2(double* p, const double* g, double* m, double* v, std::size_t n,
                      double lr, double b1, double b2, double eps, double b1p, double b2p) {
    const double mc = 1.0 / (1.0 - b1p);
    const double vc = 1.0 / (1.0 - b2p);
    const __m256d vb1 = _mm256_set1_pd(b1), v1b1 = _mm256_set1_pd(1.0 - b1);
    const __m256d vb2 = _mm256_set1_pd(b2), v1b2 = _mm256_set1_pd(1.0 - b2);
    const __m256d vmc = _mm256_set1_pd(mc), vvc = _mm256_set1_pd(vc);
    const __m256d vlr = _mm256_set1_pd(lr), veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(v1b1, gi));
        const __m256d vi =
            _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i), _mm256_mul_pd(v1b2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d num = _mm256_mul_pd(mi, vmc);
        const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vvc)), veps);
        const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(num, den));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    if (i < n)
        scalar_ops().adam_update(p + i, g + i, m + i, v + i, n - i, lr, b1, b2, eps, b1p, b2p);
}

} // namespace

const Ops& avx2_ops_impl() {
    static const Ops table{dot_avx2,      axpy_avx2,      matvec_avx2,
                           matvec_t_avx2, outer_acc_avx2, adam_update_avx2};
    return table;
}

} // namespace opencap::kern

#endif // x86-64
