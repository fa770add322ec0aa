#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dyhsl/tensor.hpp"

namespace dyhsl {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so the recording order is a
/// topological order. A tape is owned by one forward/backward pass.
class Tape {
 public:
  /// Receives the upstream gradient of the node and pushes contributions
  /// into its parents through `Tape::accumulate`.
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (a parameter).
  Var leaf(Tensor value, std::string name = "leaf");
  /// Non-differentiable input.
  Var constant(Tensor value);

  /// Records an op result. The value is checked for non-finite entries.
  /// `parents` decides whether the node needs a gradient at all.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  /// Fills gradients for every node reachable from the scalar `loss`.
  /// Calling it again without `zero_grad()` is a contract error.
  void backward(Var loss);
  void zero_grad();

  /// Gradient of the last backward pass; zeros when the node was not reached.
  Tensor grad(Var v) const;
  void accumulate(std::size_t id, const Tensor& g);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Smallest |input| seen by any kinked op (ReLU, absolute value). Used by
  /// gradient checks to reject points that sit on a kink.
  double kink_margin() const noexcept { return kink_margin_; }
  void note_kink_margin(double margin) noexcept {
    if (margin < kink_margin_) kink_margin_ = margin;
  }

  /// Running hash of every branch taken by a piecewise op (ReLU masks,
  /// max-pool winners, residual signs). Two passes with equal signatures
  /// evaluated the same smooth piece.
  std::uint64_t branch_signature() const noexcept { return signature_; }
  void note_branch(std::uint64_t choice) noexcept { signature_ = (signature_ ^ choice) * 1099511628211ULL; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(std::string op, Tensor value, bool requires_grad, BackwardFn backward);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
  const std::string* active_op_ = nullptr;
  double kink_margin_ = std::numeric_limits<double>::infinity();
  std::uint64_t signature_ = 14695981039346656037ULL;
};

}  // namespace dyhsl
