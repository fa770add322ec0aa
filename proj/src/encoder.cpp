#include "dyhsl/encoder.hpp"

#include <vector>

#include "dyhsl/error.hpp"
#include "dyhsl/ops.hpp"

namespace dyhsl {

Var build_node_features(Tape& tape, const Tensor& x, const EncoderVars& p) {
  if (x.rank() != 3) throw DimensionError("build_node_features: signal window must be T x N x F, got " + shape_string(x.shape()));
  const std::size_t steps = x.shape()[0], nodes = x.shape()[1], features = x.shape()[2];
  const Tensor& proj = p.input_proj.value();
  const Tensor& spatial = p.spatial_emb.value();
  const Tensor& temporal = p.temporal_emb.value();
  if (proj.rows() != features || spatial.rows() != nodes || temporal.rows() != steps ||
      spatial.cols() != proj.cols() || temporal.cols() != proj.cols()) {
    throw DimensionError("build_node_features: window " + shape_string(x.shape()) + " does not fit input_proj " +
                         shape_string(proj.shape()) + ", spatial_emb " + shape_string(spatial.shape()) +
                         ", temporal_emb " + shape_string(temporal.shape()));
  }
  std::vector<std::size_t> node_of(steps * nodes), step_of(steps * nodes);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < nodes; ++i) {
      node_of[temporal_index(i, t, nodes)] = i;
      step_of[temporal_index(i, t, nodes)] = t;
    }
  }
  Var signal = tape.constant(x.reshaped({steps * nodes, features}));
  Var h = add(matmul(signal, p.input_proj), gather_rows(p.spatial_emb, std::move(node_of)));
  return add(h, gather_rows(p.temporal_emb, std::move(step_of)));
}

Var prior_graph_convolution(Var h, const TemporalGraph& g, const EncoderVars& p) {
  if (!g.is_normalized()) throw ContractError("prior_graph_convolution: temporal graph is not normalized");
  if (h.value().rows() != g.n_nodes()) {
    throw DimensionError("prior_graph_convolution: " + std::to_string(h.value().rows()) +
                         " state rows for a temporal graph of " + std::to_string(g.n_nodes()) + " nodes");
  }
  for (const Var& w : p.layers) h = relu(matmul(spmm(g.normalized(), h), w));
  return h;
}

}  // namespace dyhsl
