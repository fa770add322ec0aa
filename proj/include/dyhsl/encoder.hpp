#pragma once

#include "dyhsl/params.hpp"
#include "dyhsl/tape.hpp"
#include "dyhsl/topology.hpp"

namespace dyhsl {

/// Initial observation features, one row per (step, node) in time-major order:
/// row(t, i) = x[t, i, :] * input_proj + spatial_emb[i] + temporal_emb[t].
/// `x` is a T x N x F window.
Var build_node_features(Tape& tape, const Tensor& x, const EncoderVars& p);

/// L_p rounds of h <- relu(A_norm h W_l) over the temporal graph.
Var prior_graph_convolution(Var h, const TemporalGraph& g, const EncoderVars& p);

}  // namespace dyhsl
