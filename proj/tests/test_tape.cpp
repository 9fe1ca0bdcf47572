// Tape autodiff checks: trivial forward values, finite-difference gradient
// agreement for every primitive (kink-avoiding inputs), linearity, replay
// determinism, off-path zero gradients.

#include "metaeu/tape.hpp"

#include "testutil.hpp"
#include <doctest.h>

#include <cmath>

using namespace metaeu;

TEST_CASE("forward primitives match their definitions") {
    Tape tape;
    auto relu_in = tape.constant(Tensor2::from_rows({{-1.0, 2.0}}));
    auto r = tape.relu(relu_in);
    CHECK(tape.value(r).at(0, 0) == 0.0);
    CHECK(tape.value(r).at(0, 1) == 2.0);

    auto a = tape.constant(Tensor2::zeros(2, 2));
    auto b = tape.constant(Tensor2::zeros(2, 3));
    auto cat = tape.concat_cols(a, b);
    CHECK(tape.value(cat).rows == 2);
    CHECK(tape.value(cat).cols == 5);

    // matmul vs naive loop
    Rng rng(5);
    Tensor2 A = testutil::random_tensor(2, 3, rng);
    Tensor2 B = testutil::random_tensor(3, 2, rng);
    auto mm = tape.matmul(tape.constant(A), tape.constant(B));
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j) {
            double want = 0;
            for (int64_t p = 0; p < 3; ++p) want += A.at(i, p) * B.at(p, j);
            CHECK(testutil::rel_err(tape.value(mm).at(i, j), want) < 1e-12);
        }

}

TEST_CASE("shape mismatches throw dimension errors") {
    Tape tape;
    auto a = tape.constant(Tensor2::zeros(2, 2));
    auto b = tape.constant(Tensor2::zeros(2, 3));
    CHECK_THROWS_AS(tape.add(a, b), Error);
    CHECK_THROWS_AS(tape.matmul(b, b), Error);
    CHECK_THROWS_AS(tape.backward(a), Error); // non-scalar output
}

TEST_CASE("relu pass-through gradient for all-positive weights") {
    // f = sum(relu(x W)) with everything positive: df/dW[i][j] = x[i]
    Tensor2 x = Tensor2::from_rows({{0.5, 1.5}});
    Tensor2 w = Tensor2::from_rows({{1.0, 2.0}, {3.0, 0.5}});
    Tape tape;
    auto xn = tape.constant(x);
    auto wn = tape.leaf(w);
    auto f = tape.sum_all(tape.relu(tape.matmul(xn, wn)));
    tape.backward(f);
    const Tensor2& g = tape.grad(wn);
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j) CHECK(g.at(i, j) == x.at(0, i));
}

TEST_CASE("gradient of a parameter off the path is exactly zero") {
    Tape tape;
    auto used = tape.leaf(Tensor2::from_rows({{1.0, 2.0}}));
    auto unused = tape.leaf(Tensor2::from_rows({{3.0, 4.0}}));
    auto f = tape.sum_all(tape.mul(used, used));
    tape.backward(f);
    CHECK(tape.grad(unused).at(0, 0) == 0.0);
    CHECK(tape.grad(unused).at(0, 1) == 0.0);
}

TEST_CASE("l2 norm of a+b-c matches finite differences") {
    Rng rng(7);
    for (int inst = 0; inst < 10; ++inst) {
        Tensor2 a = testutil::random_tensor(3, 4, rng);
        Tensor2 b = testutil::random_tensor(3, 4, rng);
        Tensor2 c = testutil::random_tensor(3, 4, rng);
        auto f = [&]() {
            Tape t;
            auto diff = t.sub(t.add(t.constant(a), t.constant(b)), t.constant(c));
            return t.value(t.sum_all(t.rownorm_l2(diff))).data[0];
        };
        Tape tape;
        auto an = tape.leaf(a);
        auto bn = tape.leaf(b);
        auto cn = tape.leaf(c);
        auto loss = tape.sum_all(tape.rownorm_l2(tape.sub(tape.add(an, bn), cn)));
        tape.backward(loss);
        for (size_t i = 0; i < a.size(); i += 3) {
            double fd = testutil::central_diff(a.data, i, f);
            CHECK(testutil::rel_err(tape.grad(an).data[i], fd) < 1e-6);
            fd = testutil::central_diff(c.data, i, f);
            CHECK(testutil::rel_err(tape.grad(cn).data[i], fd) < 1e-6);
        }
    }
}

namespace {

// Builds a scalar loss exercising one primitive on leaf x; returns loss id
// and leaf id. Inputs are kept away from relu/l1 kinks by the caller.
struct Built {
    Tape::Id loss;
    Tape::Id leaf;
};

using Builder = std::function<Built(Tape&, const Tensor2&)>;

void check_gradient(const char* name, const Builder& build, const Tensor2& x0) {
    Tensor2 x = x0;
    Tape tape;
    Built built = build(tape, x);
    tape.backward(built.loss);
    auto eval = [&]() {
        Tape t;
        return t.value(build(t, x).loss).data[0];
    };
    for (size_t i = 0; i < x.size(); ++i) {
        double fd = testutil::central_diff(x.data, i, eval);
        double an = tape.grad(built.leaf).data[i];
        INFO(name, " coord ", i);
        CHECK(testutil::rel_err(an, fd) < 1e-4);
    }
}

Tensor2 kink_free(int64_t r, int64_t c, Rng& rng) {
    Tensor2 t(r, c);
    for (auto& v : t.data) {
        double m = rng.uniform(0.05, 1.5); // keep |v| well above fd step
        v = rng.coin() ? m : -m;
    }
    return t;
}

} // namespace

TEST_CASE("every primitive passes finite-difference checks on random instances") {
    Rng rng(42);
    const int instances = 100;
    for (int inst = 0; inst < instances; ++inst) {
        Tensor2 x = kink_free(3, 4, rng);
        Tensor2 w = kink_free(4, 3, rng);
        Tensor2 y = kink_free(3, 4, rng);
        Tensor2 s = kink_free(1, 1, rng);

        check_gradient("matmul", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.matmul(leaf, t.constant(w))), leaf};
        }, x);
        check_gradient("add_scale", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.add(t.scale(leaf, 1.5), t.constant(y))), leaf};
        }, x);
        check_gradient("mul", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mul(leaf, t.constant(y))), leaf};
        }, x);
        check_gradient("relu", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.relu(t.add_const(leaf, 0.0))), leaf};
        }, x);
        check_gradient("concat_slice", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            auto cat = t.concat_cols(leaf, t.constant(y));
            return Built{t.sum_all(t.mul(t.slice_cols(cat, 2, 6), t.constant(y))), leaf};
        }, x);
        check_gradient("concat_rows", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            auto cat = t.concat_rows(leaf, t.constant(y));
            return Built{t.sum_all(t.gather_rows(cat, {0, 3, 4, 1})), leaf};
        }, x);
        check_gradient("gather", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mul(t.gather_rows(leaf, {2, 0, 2}), t.constant(y))), leaf};
        }, x);
        check_gradient("mean_rows", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mean_rows(leaf)), leaf};
        }, x);
        Tensor2 col = kink_free(3, 1, rng);
        check_gradient("sum_rows", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mul(t.sum_rows(leaf), t.constant(col))), leaf};
        }, x);
        check_gradient("rownorm_l1", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.rownorm_l1(leaf)), leaf};
        }, x);
        check_gradient("rownorm_l2", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.rownorm_l2(leaf)), leaf};
        }, x);
        check_gradient("sin_cos", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.add(t.sin(leaf), t.cos(leaf))), leaf};
        }, x);
        check_gradient("mul_scalar", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mul_scalar(t.constant(y), t.sum_all(leaf))), leaf};
        }, x);
        Tensor2 mask = kink_free(4, 4, rng);
        check_gradient("gather_sum", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            auto gs = t.gather_sum(leaf, {{0, 2}, {1}, {}, {0, 1, 2}},
                                   {0.5, 1.0, 0.0, 1.0 / 3});
            return Built{t.sum_all(t.mul(gs, t.constant(mask))), leaf};
        }, x);
        check_gradient("scalar_weight", [&](Tape& t, const Tensor2& v) {
            auto leaf = t.leaf(v);
            return Built{t.sum_all(t.mul_scalar(leaf, t.constant(s))), leaf};
        }, x);
    }
}

TEST_CASE("backward of a sum equals the sum of backwards") {
    Rng rng(9);
    Tensor2 x = testutil::random_tensor(2, 3, rng);
    Tensor2 y = testutil::random_tensor(2, 3, rng);

    Tape t1;
    auto l1 = t1.leaf(x);
    t1.backward(t1.sum_all(t1.mul(l1, t1.constant(y))));

    Tape t2;
    auto l2 = t2.leaf(x);
    t2.backward(t2.sum_all(t2.mul(t2.mul(l2, l2), t2.constant(y))));

    Tape t3;
    auto l3 = t3.leaf(x);
    auto a3 = t3.sum_all(t3.mul(l3, t3.constant(y)));
    auto b3 = t3.sum_all(t3.mul(t3.mul(l3, l3), t3.constant(y)));
    t3.backward(t3.add(a3, b3));

    for (size_t i = 0; i < x.size(); ++i)
        CHECK(testutil::rel_err(t3.grad(l3).data[i], t1.grad(l1).data[i] + t2.grad(l2).data[i]) <
              1e-12);
}

TEST_CASE("tape replay is deterministic") {
    auto run = []() {
        Rng rng(31);
        Tensor2 x = testutil::random_tensor(4, 4, rng);
        Tape t;
        auto leaf = t.leaf(x);
        auto loss = t.sum_all(t.relu(t.matmul(leaf, leaf)));
        t.backward(loss);
        return std::make_pair(t.value(loss).data[0], t.grad(leaf).data);
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}
