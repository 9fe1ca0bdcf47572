// Kernel-level checks: scalar reference against the naive definitions and,
// when the machine has AVX2, backend equivalence (bit-exact for elementwise
// kernels, tolerance-bounded for reassociating reductions and matmul).

#include "metaeu/kernels.hpp"
#include "metaeu/rng.hpp"

#include "testutil.hpp"
#include <doctest.h>

#include <cmath>
#include <vector>

using namespace metaeu;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

// naive ijk matmul, the oracle the kernels are compared against
void matmul_ref(const std::vector<double>& A, const std::vector<double>& B,
                std::vector<double>& C, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[p * n + j];
            C[i * n + j] = acc;
        }
}

} // namespace

TEST_CASE("scalar kernels match naive definitions") {
    Rng rng(11);
    for (size_t n : {1u, 3u, 4u, 7u, 64u, 129u}) {
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);
        std::vector<double> out(n);

        const auto& K = kern::scalar_ops();
        K.add(a.data(), b.data(), out.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] + b[i]);
        K.mul(a.data(), b.data(), out.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(out[i] == a[i] * b[i]);
        K.relu(a.data(), out.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(out[i] == (a[i] > 0 ? a[i] : 0.0));

        double s = 0;
        for (double v : a) s += v;
        CHECK(testutil::rel_err(K.sum(a.data(), n), s) < 1e-12);
        double d = 0;
        for (size_t i = 0; i < n; ++i) d += a[i] * b[i];
        CHECK(testutil::rel_err(K.dot(a.data(), b.data(), n), d) < 1e-12);
    }
}

TEST_CASE("matmul kernels match the triple-loop oracle") {
    Rng rng(12);
    for (auto [m, k, n] : std::vector<std::array<size_t, 3>>{
             {1, 1, 1}, {2, 3, 2}, {5, 7, 3}, {8, 8, 8}, {13, 31, 9}}) {
        auto A = random_vec(m * k, rng);
        auto B = random_vec(k * n, rng);
        std::vector<double> want(m * n), got(m * n);
        matmul_ref(A, B, want, m, k, n);
        kern::ops().matmul(A.data(), B.data(), got.data(), m, k, n);
        for (size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(got[i], want[i]) < 1e-12);

        // accumulate variants: C += A^T*B and C += A*B^T against explicit loops
        std::vector<double> at_want(k * n, 0.5), at_got(k * n, 0.5);
        for (size_t p = 0; p < m; ++p)
            for (size_t i = 0; i < k; ++i)
                for (size_t j = 0; j < n; ++j) at_want[i * n + j] += A[p * k + i] * B[p * n + j];
        kern::ops().matmul_at_acc(A.data(), B.data(), at_got.data(), m, k, n);
        for (size_t i = 0; i < k * n; ++i) CHECK(testutil::rel_err(at_got[i], at_want[i]) < 1e-12);

        auto Bt = random_vec(n * k, rng); // n x k, used as B^T
        std::vector<double> bt_want(m * n, -0.25), bt_got(m * n, -0.25);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                for (size_t p = 0; p < k; ++p) bt_want[i * n + j] += A[i * k + p] * Bt[j * k + p];
        kern::ops().matmul_bt_acc(A.data(), Bt.data(), bt_got.data(), m, k, n);
        for (size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(bt_got[i], bt_want[i]) < 1e-12);
    }
}

TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
    if (!kern::avx2_available()) {
        MESSAGE("AVX2 not available; skipping backend equivalence");
        return;
    }
    const kern::Ops& S = kern::scalar_ops();
    const kern::Ops& V = *kern::avx2_ops_or_null();
    Rng rng(13);

    // sizes straddling the 4-lane width to cover remainder tails
    for (size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 15u, 16u, 17u, 100u, 1023u}) {
        auto a = random_vec(n, rng);
        auto b = random_vec(n, rng);
        std::vector<double> s_out(n), v_out(n);

        // elementwise: bit-exact
        S.add(a.data(), b.data(), s_out.data(), n);
        V.add(a.data(), b.data(), v_out.data(), n);
        CHECK(s_out == v_out);
        S.sub(a.data(), b.data(), s_out.data(), n);
        V.sub(a.data(), b.data(), v_out.data(), n);
        CHECK(s_out == v_out);
        S.mul(a.data(), b.data(), s_out.data(), n);
        V.mul(a.data(), b.data(), v_out.data(), n);
        CHECK(s_out == v_out);
        S.scale(a.data(), 1.7, s_out.data(), n);
        V.scale(a.data(), 1.7, v_out.data(), n);
        CHECK(s_out == v_out);
        S.add_const(a.data(), -0.3, s_out.data(), n);
        V.add_const(a.data(), -0.3, v_out.data(), n);
        CHECK(s_out == v_out);
        S.relu(a.data(), s_out.data(), n);
        V.relu(a.data(), v_out.data(), n);
        CHECK(s_out == v_out);

        std::vector<double> s_acc(n, 0.1), v_acc(n, 0.1);
        S.relu_backward_acc(a.data(), b.data(), s_acc.data(), n);
        V.relu_backward_acc(a.data(), b.data(), v_acc.data(), n);
        CHECK(s_acc == v_acc);

        // reductions: reassociation-tolerant comparison
        CHECK(testutil::rel_err(S.sum(a.data(), n), V.sum(a.data(), n)) < 1e-13);
        CHECK(testutil::rel_err(S.dot(a.data(), b.data(), n), V.dot(a.data(), b.data(), n)) <
              1e-13);
        CHECK(testutil::rel_err(S.l1(a.data(), n), V.l1(a.data(), n)) < 1e-13);
        CHECK(testutil::rel_err(S.sumsq(a.data(), n), V.sumsq(a.data(), n)) < 1e-13);
    }

    for (auto [m, k, n] : std::vector<std::array<size_t, 3>>{{3, 5, 7}, {16, 16, 16}, {9, 33, 6}}) {
        auto A = random_vec(m * k, rng);
        auto B = random_vec(k * n, rng);
        std::vector<double> s_out(m * n), v_out(m * n);
        S.matmul(A.data(), B.data(), s_out.data(), m, k, n);
        V.matmul(A.data(), B.data(), v_out.data(), m, k, n);
        for (size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(s_out[i], v_out[i]) < 1e-13);
    }
}

TEST_CASE("backend selection is reported and forceable") {
    const char* name = kern::backend_name();
    CHECK((std::string(name) == "avx2" || std::string(name) == "scalar"));
    kern::Backend before = kern::active_backend();
    kern::select(kern::Backend::Scalar);
    CHECK(kern::active_backend() == kern::Backend::Scalar);
    kern::select(before);
    CHECK(kern::active_backend() == before);
}
