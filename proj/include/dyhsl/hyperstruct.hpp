#pragma once

#include <cstddef>
#include <vector>

#include "dyhsl/params.hpp"
#include "dyhsl/tape.hpp"

namespace dyhsl {

/// Low-rank incidence matrix: states (rows x d) times the d x I factor.
/// No activation or normalization; entries may be negative.
Var learn_incidence(Var h, const HyperVars& p);

/// Hyperedge embeddings E = relu(U L^T H) + L^T H, shape I x d.
Var hyperedge_embed(Var h, Var incidence, const HyperVars& p);

/// Node update F = L E: incidence-weighted sums of hyperedge embeddings.
Var hypergraph_convolve(Var incidence, Var hyperedges);

/// Stacks `layers` hypergraph convolutions, relearning the incidence matrix
/// from the current states at every layer. When `incidence_trace` is set,
/// each layer's incidence matrix is appended to it.
Var dhsl_block(Var h, const HyperVars& p, std::size_t layers, std::vector<Tensor>* incidence_trace = nullptr);

}  // namespace dyhsl
