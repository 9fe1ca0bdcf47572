// AVX2+FMA kernels. Compiled with -mavx2 -mfma in its own translation unit;
// only reached after a runtime CPU check, so the rest of the binary stays
// baseline-ISA clean.
//
// Elementwise kernels must match the scalar reference bit for bit (same
// per-element expression, no reassociation). Reductions and matmul use
// 4-wide accumulators and therefore reassociate; tests compare them to the
// scalar reference under a tolerance.

#include "metaeu/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>
#include <cmath>

namespace metaeu::kern {

namespace {

void v_add(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(const double* a, double alpha, double* out, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), va));
    for (; i < n; ++i) out[i] = a[i] * alpha;
}

void v_add_const(const double* a, double alpha, double* out, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), va));
    for (; i < n; ++i) out[i] = a[i] + alpha;
}

void v_relu(const double* a, double* out, size_t n) {
    __m256d z = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), z));
    for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void v_relu_backward_acc(const double* a, const double* g, double* out, size_t n) {
    __m256d z = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(a + i), z, _CMP_GT_OQ);
        __m256d gv = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gv));
    }
    for (; i < n; ++i)
        if (a[i] > 0.0) out[i] += g[i];
}

void v_axpy(double alpha, const double* x, double* out, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(out + i)));
    for (; i < n; ++i) out[i] += alpha * x[i];
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double v_sum(const double* a, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double v_dot(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double v_l1(const double* a, size_t n) {
    // clear the sign bit
    __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_and_pd(_mm256_loadu_pd(a + i), signmask));
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(a[i]);
    return s;
}

double v_sumsq(const double* a, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(a + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * a[i];
    return s;
}

// ikj with broadcast A and fmadd over C rows.
void v_matmul(const double* A, const double* B, double* C,
              size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        size_t j = 0;
        for (; j + 4 <= n; j += 4) _mm256_storeu_pd(crow + j, _mm256_setzero_pd());
        for (; j < n; ++j) crow[j] = 0.0;
        for (size_t p = 0; p < k; ++p) {
            __m256d a = _mm256_set1_pd(A[i * k + p]);
            const double* brow = B + p * n;
            j = 0;
            for (; j + 4 <= n; j += 4)
                _mm256_storeu_pd(crow + j,
                                 _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j),
                                                 _mm256_loadu_pd(crow + j)));
            double as = A[i * k + p];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void v_matmul_at_acc(const double* A, const double* B, double* C,
                     size_t m, size_t k, size_t n) {
    for (size_t p = 0; p < m; ++p) {
        const double* arow = A + p * k;
        const double* brow = B + p * n;
        for (size_t i = 0; i < k; ++i) {
            __m256d a = _mm256_set1_pd(arow[i]);
            double* crow = C + i * n;
            size_t j = 0;
            for (; j + 4 <= n; j += 4)
                _mm256_storeu_pd(crow + j,
                                 _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j),
                                                 _mm256_loadu_pd(crow + j)));
            double as = arow[i];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void v_matmul_bt_acc(const double* A, const double* B, double* C,
                     size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        double* crow = C + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] += v_dot(arow, B + j * k, k);
    }
}

} // namespace

const Ops* avx2_ops_or_null() {
    static const Ops table = {
        v_add,  v_sub,  v_mul, v_scale, v_add_const, v_relu, v_relu_backward_acc,
        v_axpy, v_sum,  v_dot, v_l1,    v_sumsq,
        v_matmul, v_matmul_at_acc, v_matmul_bt_acc,
    };
    return &table;
}

} // namespace metaeu::kern

#else

namespace metaeu::kern {
const Ops* avx2_ops_or_null() { return nullptr; }
} // namespace metaeu::kern

#endif
