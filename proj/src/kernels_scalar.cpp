// Scalar reference kernels. These are the semantic ground truth the SIMD
// variants are tested against; keep them as plain loops.

#include "metaeu/kernels.hpp"

#include <cmath>

namespace metaeu::kern {

namespace {

void s_add(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* a, double alpha, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * alpha;
}

void s_add_const(const double* a, double alpha, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + alpha;
}

void s_relu(const double* a, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void s_relu_backward_acc(const double* a, const double* g, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (a[i] > 0.0) out[i] += g[i];
}

void s_axpy(double alpha, const double* x, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] += alpha * x[i];
}

double s_sum(const double* a, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double s_dot(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_l1(const double* a, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::fabs(a[i]);
    return acc;
}

double s_sumsq(const double* a, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

// ikj order: stream over B rows, accumulate into C rows.
void s_matmul(const double* A, const double* B, double* C,
              size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (size_t p = 0; p < k; ++p) {
            double a = A[i * k + p];
            const double* brow = B + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

// C(k×n) += A^T(k×m) * B(m×n) with A given as m×k
void s_matmul_at_acc(const double* A, const double* B, double* C,
                     size_t m, size_t k, size_t n) {
    for (size_t p = 0; p < m; ++p) {
        const double* arow = A + p * k;
        const double* brow = B + p * n;
        for (size_t i = 0; i < k; ++i) {
            double a = arow[i];
            double* crow = C + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

// C(m×n) += A(m×k) * B^T with B given as n×k
void s_matmul_bt_acc(const double* A, const double* B, double* C,
                     size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        double* crow = C + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = B + j * k;
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        s_add,  s_sub,  s_mul, s_scale, s_add_const, s_relu, s_relu_backward_acc,
        s_axpy, s_sum,  s_dot, s_l1,    s_sumsq,
        s_matmul, s_matmul_at_acc, s_matmul_bt_acc,
    };
    return table;
}

} // namespace metaeu::kern
