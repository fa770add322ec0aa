#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "dyhsl/tensor.hpp"

namespace dyhsl {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Static weighted road graph over N sensors. Edge (src, dst, w) sets A[src][dst] = w.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  /// Validates ids, weights and uniqueness; throws ContractError.
  RoadNetwork(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t n_nodes() const noexcept { return n_nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Number of strictly positive entries of A.
  std::size_t nnz() const noexcept;

  /// Relabels node i as perm[i].
  RoadNetwork permuted(const std::vector<std::size_t>& perm) const;

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
};

/// `from,to,weight` CSV with a header line. Errors carry the line number.
RoadNetwork read_road_network_csv(const std::filesystem::path& path, std::size_t n_nodes);
void write_road_network_csv(const std::filesystem::path& path, const RoadNetwork& net);

/// Row of observation (node, step) in every time-major state matrix.
constexpr std::size_t temporal_index(std::size_t node, std::size_t step, std::size_t n_nodes) noexcept {
  return step * n_nodes + node;
}

/// Time expansion of a road network over `t_steps` steps: spatial copies per
/// step, unit self-loops, and unit edges from (i, t) to (i, t + 1).
class TemporalGraph {
 public:
  TemporalGraph(std::size_t n_base_nodes, std::size_t t_steps, std::shared_ptr<const SparseMatrix> adjacency,
                std::shared_ptr<const SparseMatrix> normalized = nullptr);

  std::size_t n_base_nodes() const noexcept { return n_base_nodes_; }
  std::size_t t_steps() const noexcept { return t_steps_; }
  std::size_t n_nodes() const noexcept { return n_base_nodes_ * t_steps_; }
  std::size_t nnz() const noexcept { return static_cast<std::size_t>(adjacency_->nonZeros()); }

  const SparseMatrix& adjacency() const noexcept { return *adjacency_; }
  bool is_normalized() const noexcept { return normalized_ != nullptr; }
  /// Row-stochastic adjacency; throws ContractError when not normalized yet.
  const std::shared_ptr<const SparseMatrix>& normalized() const;

 private:
  std::size_t n_base_nodes_;
  std::size_t t_steps_;
  std::shared_ptr<const SparseMatrix> adjacency_;
  std::shared_ptr<const SparseMatrix> normalized_;
};

TemporalGraph build_temporal_graph(const RoadNetwork& net, std::size_t t_steps);
/// D^-1 A with D the row sums.
TemporalGraph normalize_adjacency(const TemporalGraph& g);

}  // namespace dyhsl
