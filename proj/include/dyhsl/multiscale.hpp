#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dyhsl/params.hpp"
#include "dyhsl/tape.hpp"
#include "dyhsl/topology.hpp"

namespace dyhsl {

struct ScaleConfig {
  std::vector<std::size_t> windows{1, 2, 3, 4, 6, 12};
  std::size_t n_layers = 2;
};

/// Architecture hyperparameters. Defaults follow the reference setup:
/// 12-step lookback and horizon, d = 64, 32 hyperedges, 6 prior layers,
/// 2 multi-scale layers and windows {1, 2, 3, 4, 6, 12}.
struct ModelConfig {
  std::size_t n_nodes = 0;
  std::size_t n_features = 1;
  std::size_t lookback = 12;
  std::size_t horizon = 12;
  std::size_t hidden = 64;
  std::size_t hyperedges = 32;
  std::size_t prior_layers = 6;
  std::size_t hyper_layers = 1;
  std::size_t mhce_layers = 2;
  std::vector<std::size_t> windows{1, 2, 3, 4, 6, 12};

  ScaleConfig scale_config() const { return {windows, mhce_layers}; }
  /// Throws ConfigError with a one-line reason.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-layer incidence matrices recorded during a forward pass,
/// indexed [scale][mhce layer * hyper layers + hyper layer].
struct ForwardTrace {
  std::vector<std::vector<Tensor>> incidence;
};

/// Windowed local max over time for each node; T / window output steps.
Var temporal_pool(Var h, std::size_t n_nodes, std::size_t window);

/// One multi-scale layer: the average of the hypergraph and the interactive
/// convolution blocks applied to the same input.
Var mhce_layer(Var h, const TemporalGraph& g, const ScaleVars& p, std::size_t hyper_layers,
               std::vector<Tensor>* incidence_trace = nullptr);

/// Softmax-weighted combination of per-scale node embeddings (each N x d).
Var fuse_scales(const std::vector<Var>& per_scale, const FusionVars& p);

/// Affine readout of [global || last local state] per node, returned as T' x N.
Var forecast_head(Var global, Var last_state, const ReadoutVars& p);

/// Random initial parameters for `config`, fully determined by `seed`.
ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);
/// All-zero parameters with the layout of `config`.
ModelParameters zero_parameters(const ModelConfig& config);
/// Throws DimensionError when `params` does not have the layout of `config`.
void check_parameter_layout(const ModelConfig& config, const ModelParameters& params);

/// The full forecaster: owns the road network and the temporal graphs for
/// every pooled length. Immutable after construction, so one instance can
/// serve concurrent forward passes on separate tapes.
class DyHSLModel {
 public:
  DyHSLModel(ModelConfig config, RoadNetwork network);

  const ModelConfig& config() const noexcept { return config_; }
  const RoadNetwork& network() const noexcept { return network_; }
  /// Normalized temporal graph over `t_steps` steps (lookback / window).
  const TemporalGraph& graph(std::size_t t_steps) const;

  /// Predictions (T' x N, normalized units) for a T x N x F window.
  Var forward(Tape& tape, const ModelVars& params, const Tensor& window, ForwardTrace* trace = nullptr) const;
  /// Forward pass without keeping the tape.
  Tensor predict(const ModelParameters& params, const Tensor& window, ForwardTrace* trace = nullptr) const;

 private:
  ModelConfig config_;
  RoadNetwork network_;
  std::map<std::size_t, TemporalGraph> graphs_;
};

/// Free-function form of `DyHSLModel::forward`.
Var dyhsl_forward(Tape& tape, const DyHSLModel& model, const ModelVars& params, const Tensor& window,
                  ForwardTrace* trace = nullptr);

}  // namespace dyhsl
