#pragma once
// Reverse-mode differentiation over Tensor2 primitives.
//
// A Tape owns a growing list of nodes; every primitive records its parents
// and enough auxiliary data to replay the backward rule. backward() walks
// the node list in reverse creation order (reverse topological order by
// construction, each node visited once) and accumulates gradients into
// every node with requires_grad set.
//
// Conventions:
//  - "scalar" means a 1×1 tensor; backward() requires a scalar output.
//  - gradients of ReLU and |x| at 0 are defined as 0.
//  - a tape is confined to one training step/episode; build, backward, drop.

#include "metaeu/tensor.hpp"

#include <cstdint>
#include <vector>

namespace metaeu {

class Tape {
public:
    using Id = int32_t;
    static constexpr Id kNone = -1;

    // --- graph construction -------------------------------------------
    Id leaf(Tensor2 value, bool requires_grad = true);
    Id constant(Tensor2 value) { return leaf(std::move(value), false); }

    Id matmul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);                 // elementwise
    Id scale(Id a, double alpha);       // alpha is a constant, not differentiated
    Id add_const(Id a, double alpha);
    Id mul_scalar(Id a, Id s);          // s is 1×1, differentiated
    Id concat_cols(Id a, Id b);
    Id concat_rows(Id a, Id b);
    Id slice_cols(Id a, int64_t c0, int64_t c1); // [c0, c1)
    Id relu(Id a);
    Id sin(Id a);
    Id cos(Id a);
    Id gather_rows(Id a, std::vector<int64_t> indices);
    Id mean_rows(Id a);                 // n×d -> 1×d
    Id sum_rows(Id a);                  // n×d -> n×1
    Id sum_all(Id a);                   // -> 1×1
    Id rownorm_l1(Id a);                // n×d -> n×1, per-row L1 norm
    Id rownorm_l2(Id a);                // n×d -> n×1, per-row L2 norm
    // out[i] = weight[i] * sum_{j in lists[i]} a[j]; rows with empty lists are 0.
    // lists/weights are constants (graph structure), gradients flow into a.
    Id gather_sum(Id a, std::vector<std::vector<int64_t>> lists, std::vector<double> weights);

    // --- execution ------------------------------------------------------
    // Accumulates d(output)/d(node) for every node with requires_grad.
    // output must be 1×1; throws contract_error otherwise.
    void backward(Id output);

    const Tensor2& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    // Zero tensor of the node's shape if backward never reached it.
    const Tensor2& grad(Id id) const;
    bool requires_grad(Id id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        Leaf, MatMul, Add, Sub, Mul, Scale, AddConst, MulScalar,
        ConcatCols, ConcatRows, SliceCols, Relu, Sin, Cos,
        GatherRows, MeanRows, SumRows, SumAll, RowNormL1, RowNormL2, GatherSum,
    };

    struct Node {
        Op op = Op::Leaf;
        Id a = kNone, b = kNone;
        Tensor2 value;
        Tensor2 grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        double alpha = 0.0;                       // Scale / AddConst / SliceCols c0
        int64_t extent = 0;                       // SliceCols c1
        std::vector<int64_t> indices;             // GatherRows
        std::vector<std::vector<int64_t>> lists;  // GatherSum
        std::vector<double> weights;              // GatherSum
    };

    Id push(Node n);
    Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(Id id) const { return nodes_[static_cast<size_t>(id)]; }
    Tensor2& grad_buf(Id id); // allocates on first touch
    void backward_one(Node& n);

    std::vector<Node> nodes_;
};

} // namespace metaeu
