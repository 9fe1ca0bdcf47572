#include "metaeu/tape.hpp"
#include "metaeu/kernels.hpp"

#include <cmath>

namespace metaeu {

namespace {
const kern::Ops& K() { return kern::ops(); }

void require(bool cond, const char* msg) {
    if (!cond) throw Error("dim_error", msg);
}
} // namespace

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor2 value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.cols == B.rows, "matmul: inner dimensions differ");
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows, B.cols);
    K().matmul(A.data.data(), B.data.data(), n.value.data.data(),
               static_cast<size_t>(A.rows), static_cast<size_t>(A.cols),
               static_cast<size_t>(B.cols));
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.same_shape(B), "add: shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows, A.cols);
    K().add(A.data.data(), B.data.data(), n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.same_shape(B), "sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows, A.cols);
    K().sub(A.data.data(), B.data.data(), n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.same_shape(B), "mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows, A.cols);
    K().mul(A.data.data(), B.data.data(), n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double alpha) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.alpha = alpha;
    n.value = Tensor2(A.rows, A.cols);
    K().scale(A.data.data(), alpha, n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::add_const(Id a, double alpha) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.alpha = alpha;
    n.value = Tensor2(A.rows, A.cols);
    K().add_const(A.data.data(), alpha, n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::mul_scalar(Id a, Id s) {
    const Tensor2& A = value(a);
    const Tensor2& S = value(s);
    require(S.rows == 1 && S.cols == 1, "mul_scalar: multiplier must be 1x1");
    Node n;
    n.op = Op::MulScalar;
    n.a = a;
    n.b = s;
    n.value = Tensor2(A.rows, A.cols);
    K().scale(A.data.data(), S.data[0], n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a) || requires_grad(s);
    return push(std::move(n));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.rows == B.rows, "concat_cols: row counts differ");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows, A.cols + B.cols);
    for (int64_t i = 0; i < A.rows; ++i) {
        double* out = n.value.row(i);
        const double* ra = A.row(i);
        const double* rb = B.row(i);
        for (int64_t j = 0; j < A.cols; ++j) out[j] = ra[j];
        for (int64_t j = 0; j < B.cols; ++j) out[A.cols + j] = rb[j];
    }
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::concat_rows(Id a, Id b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require(A.cols == B.cols, "concat_rows: column counts differ");
    Node n;
    n.op = Op::ConcatRows;
    n.a = a;
    n.b = b;
    n.value = Tensor2(A.rows + B.rows, A.cols);
    std::copy(A.data.begin(), A.data.end(), n.value.data.begin());
    std::copy(B.data.begin(), B.data.end(), n.value.data.begin() + A.data.size());
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Tape::Id Tape::slice_cols(Id a, int64_t c0, int64_t c1) {
    const Tensor2& A = value(a);
    require(0 <= c0 && c0 < c1 && c1 <= A.cols, "slice_cols: bad range");
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.alpha = static_cast<double>(c0);
    n.extent = c1;
    n.value = Tensor2(A.rows, c1 - c0);
    for (int64_t i = 0; i < A.rows; ++i) {
        const double* ra = A.row(i);
        double* out = n.value.row(i);
        for (int64_t j = c0; j < c1; ++j) out[j - c0] = ra[j];
    }
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.value = Tensor2(A.rows, A.cols);
    K().relu(A.data.data(), n.value.data.data(), A.size());
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::sin(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::Sin;
    n.a = a;
    n.value = Tensor2(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.value.data[i] = std::sin(A.data[i]);
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::cos(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::Cos;
    n.a = a;
    n.value = Tensor2(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.value.data[i] = std::cos(A.data[i]);
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::vector<int64_t> indices) {
    const Tensor2& A = value(a);
    for (int64_t idx : indices)
        require(0 <= idx && idx < A.rows, "gather_rows: index out of range");
    Node n;
    n.op = Op::GatherRows;
    n.a = a;
    n.value = Tensor2(static_cast<int64_t>(indices.size()), A.cols);
    for (size_t i = 0; i < indices.size(); ++i) {
        const double* src = A.row(indices[i]);
        double* dst = n.value.row(static_cast<int64_t>(i));
        for (int64_t j = 0; j < A.cols; ++j) dst[j] = src[j];
    }
    n.indices = std::move(indices);
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::mean_rows(Id a) {
    const Tensor2& A = value(a);
    require(A.rows > 0, "mean_rows: empty input");
    Node n;
    n.op = Op::MeanRows;
    n.a = a;
    n.value = Tensor2(1, A.cols);
    for (int64_t i = 0; i < A.rows; ++i)
        K().axpy(1.0, A.row(i), n.value.data.data(), static_cast<size_t>(A.cols));
    K().scale(n.value.data.data(), 1.0 / static_cast<double>(A.rows), n.value.data.data(),
              n.value.size());
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::sum_rows(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::SumRows;
    n.a = a;
    n.value = Tensor2(A.rows, 1);
    for (int64_t i = 0; i < A.rows; ++i)
        n.value.data[static_cast<size_t>(i)] = K().sum(A.row(i), static_cast<size_t>(A.cols));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::sum_all(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.value = Tensor2(1, 1);
    n.value.data[0] = K().sum(A.data.data(), A.size());
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::rownorm_l1(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::RowNormL1;
    n.a = a;
    n.value = Tensor2(A.rows, 1);
    for (int64_t i = 0; i < A.rows; ++i)
        n.value.data[static_cast<size_t>(i)] = K().l1(A.row(i), static_cast<size_t>(A.cols));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::rownorm_l2(Id a) {
    const Tensor2& A = value(a);
    Node n;
    n.op = Op::RowNormL2;
    n.a = a;
    n.value = Tensor2(A.rows, 1);
    for (int64_t i = 0; i < A.rows; ++i)
        n.value.data[static_cast<size_t>(i)] =
            std::sqrt(K().sumsq(A.row(i), static_cast<size_t>(A.cols)));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Tape::Id Tape::gather_sum(Id a, std::vector<std::vector<int64_t>> lists,
                          std::vector<double> weights) {
    const Tensor2& A = value(a);
    require(lists.size() == weights.size(), "gather_sum: lists/weights size mismatch");
    for (const auto& l : lists)
        for (int64_t idx : l)
            require(0 <= idx && idx < A.rows, "gather_sum: index out of range");
    Node n;
    n.op = Op::GatherSum;
    n.a = a;
    n.value = Tensor2(static_cast<int64_t>(lists.size()), A.cols);
    for (size_t i = 0; i < lists.size(); ++i) {
        double* out = n.value.row(static_cast<int64_t>(i));
        for (int64_t idx : lists[i])
            K().axpy(1.0, A.row(idx), out, static_cast<size_t>(A.cols));
        K().scale(out, weights[i], out, static_cast<size_t>(A.cols));
    }
    n.lists = std::move(lists);
    n.weights = std::move(weights);
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

const Tensor2& Tape::grad(Id id) const {
    const Node& n = node(id);
    if (n.grad_alloc) return n.grad;
    static thread_local Tensor2 zero;
    zero = Tensor2(n.value.rows, n.value.cols);
    return zero;
}

Tensor2& Tape::grad_buf(Id id) {
    Node& n = node(id);
    if (!n.grad_alloc) {
        n.grad = Tensor2(n.value.rows, n.value.cols);
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::backward(Id output) {
    Node& out = node(output);
    if (out.value.rows != 1 || out.value.cols != 1)
        throw Error("contract_error", "backward: output must be a 1x1 scalar");
    grad_buf(output).data[0] = 1.0;
    for (Id id = output; id >= 0; --id) {
        Node& n = node(id);
        if (!n.requires_grad || !n.grad_alloc) continue;
        backward_one(n);
    }
}

void Tape::backward_one(Node& n) {
    const Tensor2& G = n.grad;
    switch (n.op) {
    case Op::Leaf:
        break;
    case Op::MatMul: {
        const Tensor2& A = value(n.a);
        const Tensor2& B = value(n.b);
        size_t m = static_cast<size_t>(A.rows), k = static_cast<size_t>(A.cols),
               c = static_cast<size_t>(B.cols);
        if (requires_grad(n.a))
            K().matmul_bt_acc(G.data.data(), B.data.data(), grad_buf(n.a).data.data(), m, c, k);
        if (requires_grad(n.b))
            K().matmul_at_acc(A.data.data(), G.data.data(), grad_buf(n.b).data.data(), m, k, c);
        break;
    }
    case Op::Add:
        if (requires_grad(n.a)) K().axpy(1.0, G.data.data(), grad_buf(n.a).data.data(), G.size());
        if (requires_grad(n.b)) K().axpy(1.0, G.data.data(), grad_buf(n.b).data.data(), G.size());
        break;
    case Op::Sub:
        if (requires_grad(n.a)) K().axpy(1.0, G.data.data(), grad_buf(n.a).data.data(), G.size());
        if (requires_grad(n.b)) K().axpy(-1.0, G.data.data(), grad_buf(n.b).data.data(), G.size());
        break;
    case Op::Mul: {
        const Tensor2& A = value(n.a);
        const Tensor2& B = value(n.b);
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            for (size_t i = 0; i < G.size(); ++i) da.data[i] += G.data[i] * B.data[i];
        }
        if (requires_grad(n.b)) {
            Tensor2& db = grad_buf(n.b);
            for (size_t i = 0; i < G.size(); ++i) db.data[i] += G.data[i] * A.data[i];
        }
        break;
    }
    case Op::Scale:
        if (requires_grad(n.a)) K().axpy(n.alpha, G.data.data(), grad_buf(n.a).data.data(), G.size());
        break;
    case Op::AddConst:
        if (requires_grad(n.a)) K().axpy(1.0, G.data.data(), grad_buf(n.a).data.data(), G.size());
        break;
    case Op::MulScalar: {
        const Tensor2& A = value(n.a);
        double s = value(n.b).data[0];
        if (requires_grad(n.a)) K().axpy(s, G.data.data(), grad_buf(n.a).data.data(), G.size());
        if (requires_grad(n.b))
            grad_buf(n.b).data[0] += K().dot(G.data.data(), A.data.data(), G.size());
        break;
    }
    case Op::ConcatCols: {
        const Tensor2& A = value(n.a);
        const Tensor2& B = value(n.b);
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            for (int64_t i = 0; i < A.rows; ++i)
                K().axpy(1.0, G.row(i), da.row(i), static_cast<size_t>(A.cols));
        }
        if (requires_grad(n.b)) {
            Tensor2& db = grad_buf(n.b);
            for (int64_t i = 0; i < B.rows; ++i)
                K().axpy(1.0, G.row(i) + A.cols, db.row(i), static_cast<size_t>(B.cols));
        }
        break;
    }
    case Op::ConcatRows: {
        const Tensor2& A = value(n.a);
        if (requires_grad(n.a))
            K().axpy(1.0, G.data.data(), grad_buf(n.a).data.data(), A.size());
        if (requires_grad(n.b))
            K().axpy(1.0, G.data.data() + A.size(), grad_buf(n.b).data.data(),
                     G.size() - A.size());
        break;
    }
    case Op::SliceCols: {
        if (!requires_grad(n.a)) break;
        Tensor2& da = grad_buf(n.a);
        int64_t c0 = static_cast<int64_t>(n.alpha);
        for (int64_t i = 0; i < G.rows; ++i) {
            const double* g = G.row(i);
            double* d = da.row(i) + c0;
            for (int64_t j = 0; j < G.cols; ++j) d[j] += g[j];
        }
        break;
    }
    case Op::Relu:
        if (requires_grad(n.a)) {
            const Tensor2& A = value(n.a);
            K().relu_backward_acc(A.data.data(), G.data.data(), grad_buf(n.a).data.data(),
                                  G.size());
        }
        break;
    case Op::Sin:
        if (requires_grad(n.a)) {
            const Tensor2& A = value(n.a);
            Tensor2& da = grad_buf(n.a);
            for (size_t i = 0; i < G.size(); ++i) da.data[i] += G.data[i] * std::cos(A.data[i]);
        }
        break;
    case Op::Cos:
        if (requires_grad(n.a)) {
            const Tensor2& A = value(n.a);
            Tensor2& da = grad_buf(n.a);
            for (size_t i = 0; i < G.size(); ++i) da.data[i] -= G.data[i] * std::sin(A.data[i]);
        }
        break;
    case Op::GatherRows:
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            for (size_t i = 0; i < n.indices.size(); ++i)
                K().axpy(1.0, G.row(static_cast<int64_t>(i)), da.row(n.indices[i]),
                         static_cast<size_t>(G.cols));
        }
        break;
    case Op::MeanRows:
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            double inv = 1.0 / static_cast<double>(da.rows);
            for (int64_t i = 0; i < da.rows; ++i)
                K().axpy(inv, G.data.data(), da.row(i), static_cast<size_t>(da.cols));
        }
        break;
    case Op::SumRows:
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            for (int64_t i = 0; i < da.rows; ++i) {
                double g = G.data[static_cast<size_t>(i)];
                double* d = da.row(i);
                for (int64_t j = 0; j < da.cols; ++j) d[j] += g;
            }
        }
        break;
    case Op::SumAll:
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            double g = G.data[0];
            for (auto& v : da.data) v += g;
        }
        break;
    case Op::RowNormL1:
        if (requires_grad(n.a)) {
            const Tensor2& A = value(n.a);
            Tensor2& da = grad_buf(n.a);
            for (int64_t i = 0; i < A.rows; ++i) {
                double g = G.data[static_cast<size_t>(i)];
                const double* a = A.row(i);
                double* d = da.row(i);
                for (int64_t j = 0; j < A.cols; ++j) {
                    if (a[j] > 0.0)
                        d[j] += g;
                    else if (a[j] < 0.0)
                        d[j] -= g;
                    // 0 at the kink
                }
            }
        }
        break;
    case Op::RowNormL2:
        if (requires_grad(n.a)) {
            const Tensor2& A = value(n.a);
            Tensor2& da = grad_buf(n.a);
            for (int64_t i = 0; i < A.rows; ++i) {
                double y = n.value.data[static_cast<size_t>(i)];
                if (y == 0.0) continue;
                double g = G.data[static_cast<size_t>(i)] / y;
                K().axpy(g, A.row(i), da.row(i), static_cast<size_t>(A.cols));
            }
        }
        break;
    case Op::GatherSum:
        if (requires_grad(n.a)) {
            Tensor2& da = grad_buf(n.a);
            for (size_t i = 0; i < n.lists.size(); ++i) {
                const double* g = G.row(static_cast<int64_t>(i));
                for (int64_t idx : n.lists[i])
                    K().axpy(n.weights[i], g, da.row(idx), static_cast<size_t>(G.cols));
            }
        }
        break;
    }
}

} // namespace metaeu
