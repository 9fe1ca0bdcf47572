#pragma once
// Data-parallel inner loops used by the tensor/tape layer.
//
// Every kernel exists as a scalar reference implementation and, on x86-64
// hardware with AVX2+FMA, as a vectorized variant. The active backend is
// picked once at startup (overridable through METAEU_KERNELS=scalar|avx2 or
// kern::select). Elementwise kernels are bit-identical across backends;
// reductions and matmul may reassociate and are equivalence-tested against
// the scalar reference under a small tolerance.
//
// Matrices are row-major double buffers; there is no aliasing between
// output and input spans unless the signature says in-place.

#include <cstddef>

namespace metaeu::kern {

enum class Backend { Scalar, Avx2 };

struct Ops {
    // elementwise, out may alias a
    void (*add)(const double* a, const double* b, double* out, size_t n);
    void (*sub)(const double* a, const double* b, double* out, size_t n);
    void (*mul)(const double* a, const double* b, double* out, size_t n);
    void (*scale)(const double* a, double alpha, double* out, size_t n);
    void (*add_const)(const double* a, double alpha, double* out, size_t n);
    void (*relu)(const double* a, double* out, size_t n);
    // out += g where a > 0 (ReLU subgradient, 0 at the kink)
    void (*relu_backward_acc)(const double* a, const double* g, double* out, size_t n);
    // out += alpha * x
    void (*axpy)(double alpha, const double* x, double* out, size_t n);

    // reductions
    double (*sum)(const double* a, size_t n);
    double (*dot)(const double* a, const double* b, size_t n);
    double (*l1)(const double* a, size_t n);
    double (*sumsq)(const double* a, size_t n);

    // C = A(m×k) * B(k×n), row-major; C must be zeroed or own its contents?
    // Contract: C is overwritten.
    void (*matmul)(const double* A, const double* B, double* C,
                   size_t m, size_t k, size_t n);
    // C += A^T(m×k -> k×m) * B(m×n), used by backward passes
    void (*matmul_at_acc)(const double* A, const double* B, double* C,
                          size_t m, size_t k, size_t n);
    // C += A(m×k) * B^T(n×k -> k×n)
    void (*matmul_bt_acc)(const double* A, const double* B, double* C,
                          size_t m, size_t k, size_t n);
};

// Active dispatch table. Initialized before main() from CPU detection and
// the METAEU_KERNELS environment variable.
const Ops& ops();

Backend active_backend();
const char* backend_name();

// Force a backend (tests use this to compare implementations).
// Selecting Avx2 on a machine without AVX2 support throws.
void select(Backend b);

// Backend tables, exposed for equivalence tests.
const Ops& scalar_ops();
bool avx2_available();
const Ops* avx2_ops_or_null();

} // namespace metaeu::kern
