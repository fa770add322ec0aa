#include "dyhsl/topology.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "dyhsl/error.hpp"

namespace dyhsl {

RoadNetwork::RoadNetwork(std::size_t n_nodes, std::vector<Edge> edges) : n_nodes_(n_nodes), edges_(std::move(edges)) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& e : edges_) {
    if (e.src >= n_nodes_ || e.dst >= n_nodes_) {
      throw ContractError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") references a node >= " +
                          std::to_string(n_nodes_));
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw ContractError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                          ") has invalid weight " + std::to_string(e.weight));
    }
    if (!seen.emplace(e.src, e.dst).second) {
      throw ContractError("duplicate edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
    }
  }
}

std::size_t RoadNetwork::nnz() const noexcept {
  std::size_t n = 0;
  for (const Edge& e : edges_) n += e.weight > 0.0 ? 1 : 0;
  return n;
}

RoadNetwork RoadNetwork::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != n_nodes_) throw DimensionError("permutation size does not match node count");
  std::vector<Edge> out;
  out.reserve(edges_.size());
  for (const Edge& e : edges_) out.push_back({perm.at(e.src), perm.at(e.dst), e.weight});
  return RoadNetwork(n_nodes_, std::move(out));
}

RoadNetwork read_road_network_csv(const std::filesystem::path& path, std::size_t n_nodes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open edge file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty edge file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "from,to,weight") {
    throw FormatError(path.string() + ":1: expected header 'from,to,weight', got '" + line + "'");
  }
  std::vector<Edge> edges;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, w;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') || !std::getline(fields, w)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected three fields");
    }
    Edge e;
    try {
      std::size_t used = 0;
      const long long src = std::stoll(a, &used);
      if (used != a.size() || src < 0) throw std::invalid_argument(a);
      const long long dst = std::stoll(b, &used);
      if (used != b.size() || dst < 0) throw std::invalid_argument(b);
      e = {static_cast<std::size_t>(src), static_cast<std::size_t>(dst), std::stod(w)};
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    if (e.src >= n_nodes || e.dst >= n_nodes) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": node id out of range for N=" +
                        std::to_string(n_nodes));
    }
    edges.push_back(e);
  }
  try {
    return RoadNetwork(n_nodes, std::move(edges));
  } catch (const ContractError& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

void write_road_network_csv(const std::filesystem::path& path, const RoadNetwork& net) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  out << "from,to,weight\n";
  for (const Edge& e : net.edges()) out << e.src << ',' << e.dst << ',' << e.weight << '\n';
}

TemporalGraph::TemporalGraph(std::size_t n_base_nodes, std::size_t t_steps,
                             std::shared_ptr<const SparseMatrix> adjacency,
                             std::shared_ptr<const SparseMatrix> normalized)
    : n_base_nodes_(n_base_nodes),
      t_steps_(t_steps),
      adjacency_(std::move(adjacency)),
      normalized_(std::move(normalized)) {
  if (!adjacency_) throw ContractError("temporal graph without adjacency");
}

const std::shared_ptr<const SparseMatrix>& TemporalGraph::normalized() const {
  if (!normalized_) throw ContractError("temporal graph has not been normalized");
  return normalized_;
}

TemporalGraph build_temporal_graph(const RoadNetwork& net, std::size_t t_steps) {
  const std::size_t n = net.n_nodes();
  if (t_steps == 0) throw ContractError("build_temporal_graph: T must be at least 1");
  if (n == 0) throw ContractError("build_temporal_graph: empty road network");

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> triplets;
  triplets.reserve(t_steps * (net.nnz() + 2 * n));
  for (std::size_t t = 0; t < t_steps; ++t) {
    for (const Edge& e : net.edges()) {
      // The unit self-loop takes precedence over a diagonal entry of A.
      if (e.weight > 0.0 && e.src != e.dst) {
        triplets.emplace_back(temporal_index(e.src, t, n), temporal_index(e.dst, t, n), e.weight);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      triplets.emplace_back(temporal_index(i, t, n), temporal_index(i, t, n), 1.0);
      if (t + 1 < t_steps) triplets.emplace_back(temporal_index(i, t, n), temporal_index(i, t + 1, n), 1.0);
    }
  }
  const auto size = static_cast<Eigen::Index>(n * t_steps);
  auto adj = std::make_shared<SparseMatrix>(size, size);
  adj->setFromTriplets(triplets.begin(), triplets.end());
  adj->makeCompressed();
  return TemporalGraph(n, t_steps, std::move(adj));
}

TemporalGraph normalize_adjacency(const TemporalGraph& g) {
  auto norm = std::make_shared<SparseMatrix>(g.adjacency());
  for (Eigen::Index r = 0; r < norm->outerSize(); ++r) {
    double total = 0.0;
    for (SparseMatrix::InnerIterator it(*norm, r); it; ++it) total += it.value();
    if (!(total > 0.0)) {
      throw InternalError("normalize_adjacency: row " + std::to_string(r) + " has no positive weight");
    }
    for (SparseMatrix::InnerIterator it(*norm, r); it; ++it) it.valueRef() /= total;
  }
  return TemporalGraph(g.n_base_nodes(), g.t_steps(),
                       std::make_shared<const SparseMatrix>(g.adjacency()), std::move(norm));
}

}  // namespace dyhsl
