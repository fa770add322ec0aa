#include "dyhsl/hyperstruct.hpp"

#include "dyhsl/error.hpp"
#include "dyhsl/ops.hpp"

namespace dyhsl {

Var learn_incidence(Var h, const HyperVars& p) { return matmul(h, p.incidence_factor); }

Var hyperedge_embed(Var h, Var incidence, const HyperVars& p) {
  Var gathered = matmul(transpose(incidence), h);
  return add(relu(matmul(p.hyperedge_relations, gathered)), gathered);
}

Var hypergraph_convolve(Var incidence, Var hyperedges) { return matmul(incidence, hyperedges); }

Var dhsl_block(Var h, const HyperVars& p, std::size_t layers, std::vector<Tensor>* incidence_trace) {
  if (layers == 0) throw ConfigError("dhsl_block: at least one hypergraph layer is required");
  for (std::size_t l = 0; l < layers; ++l) {
    Var incidence = learn_incidence(h, p);
    if (incidence_trace) incidence_trace->push_back(incidence.value());
    h = hypergraph_convolve(incidence, hyperedge_embed(h, incidence, p));
  }
  return h;
}

}  // namespace dyhsl
