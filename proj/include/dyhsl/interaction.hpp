#pragma once

#include "dyhsl/params.hpp"
#include "dyhsl/tape.hpp"
#include "dyhsl/topology.hpp"

namespace dyhsl {

/// Second-order neighbourhood interaction
///   pi = relu((A h W1) .* (A h W2)),
/// the factorized form of the sum over ordered neighbour pairs (self-pairs
/// included) of A_ij A_ij' (h_j W1 .* h_j' W2). Cost is linear in nnz(A).
Var interactive_aggregate(Var h, const TemporalGraph& g, const IGCVars& p);

/// The interaction term before its activation: (A h W1) .* (A h W2).
Var interaction_product(Var h, const TemporalGraph& g, const IGCVars& p);

/// r = pi + relu(A h W3).
Var igc_block(Var h, const TemporalGraph& g, const IGCVars& p);

}  // namespace dyhsl
