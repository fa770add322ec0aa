#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "dyhsl/tape.hpp"
#include "dyhsl/tensor.hpp"

// Differentiable operations on rank-2 tensors. Every op records its result on
// the tape of its operands and registers the matching vector-Jacobian product.
namespace dyhsl {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var scale(Var a, double factor);
Var hadamard(Var a, Var b);
/// max(0, x); the subgradient at 0 is 0.
Var relu(Var a);

/// Sparse constant times dense variable: `adjacency * h`.
Var spmm(std::shared_ptr<const SparseMatrix> adjacency, Var h);

/// out.row(r) = a.row(indices[r]); gradients scatter-add back.
Var gather_rows(Var a, std::vector<std::size_t> indices);
/// Adds a 1 x n bias row to every row of `a`.
Var add_row_bias(Var a, Var bias);
Var concat_cols(Var a, Var b);

/// Time-major (t * n_nodes + i) states: elementwise max over consecutive
/// windows of `window` steps for each node.
Var temporal_max_pool(Var h, std::size_t n_nodes, std::size_t window);
/// Time-major states to one row per node holding the mean over time.
Var time_mean_pool(Var h, std::size_t n_nodes);

/// Softmax over all entries of a 1 x J row.
Var softmax(Var logits);
/// sum_j weights[j] * terms[j]; `weights` is 1 x J.
Var weighted_sum(const std::vector<Var>& terms, Var weights);

/// mean |pred - target|; the subgradient at ties is 0.
Var mean_abs_error(Var pred, Var target);
/// Sum of all entries, as a 1 x 1 tensor.
Var sum(Var a);

}  // namespace dyhsl
