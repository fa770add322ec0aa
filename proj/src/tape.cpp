#include "dyhsl/tape.hpp"

#include "dyhsl/error.hpp"

namespace dyhsl {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::push(std::string op, Tensor value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(op), std::move(value), Tensor{}, requires_grad, false, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value, std::string name) {
  value.require_finite(name);
  return push(std::move(name), std::move(value), true, nullptr);
}

Var Tape::constant(Tensor value) {
  value.require_finite("constant");
  return push("constant", std::move(value), false, nullptr);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ContractError(std::string(op) + ": operand recorded on a different tape");
    needs = needs || requires_grad(p.id());
  }
  value.require_finite(op);
  return push(op, std::move(value), needs, needs ? std::move(backward) : nullptr);
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.shape() != n.value.shape()) {
    throw InternalError("gradient shape " + shape_string(g.shape()) + " does not match value shape " +
                        shape_string(n.value.shape()) + " for op " + n.op);
  }
  if (active_op_ && !g.all_finite()) {
    throw NumericError("op '" + *active_op_ + "' produced a non-finite gradient for its input '" + n.op + "' (node " +
                       std::to_string(id) + ")");
  }
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
  if (backward_done_) throw ContractError("backward called twice without zero_grad()");
  const Tensor& lv = loss.value();
  if (lv.size() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  backward_done_ = true;

  accumulate(loss.id(), Tensor::filled(lv.shape(), 1.0));
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient flowing into op '" + n.op + "' (node " + std::to_string(k) + ")");
    }
    if (!n.backward) continue;
    active_op_ = &n.op;
    try {
      n.backward(*this, n.grad);
    } catch (...) {
      active_op_ = nullptr;
      throw;
    }
    active_op_ = nullptr;
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    n.grad = Tensor{};
    n.has_grad = false;
  }
  backward_done_ = false;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape());
}

}  // namespace dyhsl
