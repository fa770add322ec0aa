#pragma once

#include <vector>

#include "dyhsl/multiscale.hpp"
#include "dyhsl/params.hpp"
#include "dyhsl/tensor.hpp"
#include "dyhsl/topology.hpp"

// Straight-line transcriptions of the model equations on plain nested
// vectors: dense adjacency, explicit loops, no tape and no shared code with
// the production path. They exist to be compared against it.
namespace dyhsl::reference {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t);
Tensor to_tensor(const Mat& m);

/// Dense row-normalized time-expanded adjacency built by case analysis.
Mat temporal_adjacency(const RoadNetwork& net, std::size_t steps, bool normalize);

/// Interaction term before the activation, as the explicit sum over ordered
/// neighbour pairs (j, j') of A_ij A_ij' (h_j W1) .* (h_j' W2).
Mat interaction_pairs(const Mat& adjacency, const Mat& h, const Mat& w1, const Mat& w2);

/// The whole forecaster, T' x N.
Tensor forward(const ModelConfig& config, const RoadNetwork& net, const ModelParameters& params, const Tensor& window);

}  // namespace dyhsl::reference
