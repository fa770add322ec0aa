#include "dyhsl/interaction.hpp"

#include "dyhsl/error.hpp"
#include "dyhsl/ops.hpp"

namespace dyhsl {
namespace {

Var aggregate(Var h, const TemporalGraph& g, const char* who) {
  if (!g.is_normalized()) throw ContractError(std::string(who) + ": temporal graph is not normalized");
  if (h.value().rows() != g.n_nodes()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(h.value().rows()) +
                         " state rows for a temporal graph of " + std::to_string(g.n_nodes()) + " nodes");
  }
  return spmm(g.normalized(), h);
}

Var product_term(Var aggregated, const IGCVars& p) {
  return hadamard(matmul(aggregated, p.w1), matmul(aggregated, p.w2));
}

}  // namespace

Var interaction_product(Var h, const TemporalGraph& g, const IGCVars& p) {
  return product_term(aggregate(h, g, "interaction_product"), p);
}

Var interactive_aggregate(Var h, const TemporalGraph& g, const IGCVars& p) {
  return relu(product_term(aggregate(h, g, "interactive_aggregate"), p));
}

Var igc_block(Var h, const TemporalGraph& g, const IGCVars& p) {
  Var aggregated = aggregate(h, g, "igc_block");
  return add(relu(product_term(aggregated, p)), relu(matmul(aggregated, p.w3)));
}

}  // namespace dyhsl
