#include "dyhsl/multiscale.hpp"

#include <cmath>
#include <random>
#include <set>

#include "dyhsl/config_json.hpp"
#include "dyhsl/encoder.hpp"
#include "dyhsl/error.hpp"
#include "dyhsl/hyperstruct.hpp"
#include "dyhsl/interaction.hpp"
#include "dyhsl/ops.hpp"

namespace dyhsl {

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& why) {
    if (!ok) throw ConfigError(why);
  };
  need(n_nodes >= 1, "model needs at least one node");
  need(n_features >= 1, "model needs at least one input feature");
  need(lookback >= 1, "lookback must be at least 1");
  need(horizon >= 1, "horizon must be at least 1");
  need(hidden >= 1, "hidden size must be at least 1");
  need(hyperedges >= 1, "number of hyperedges must be at least 1");
  need(prior_layers >= 1, "prior encoder needs at least one layer");
  need(hyper_layers >= 1, "hypergraph block needs at least one layer");
  need(mhce_layers >= 1, "multi-scale module needs at least one layer");
  need(!windows.empty(), "at least one pooling window is required");
  std::set<std::size_t> seen;
  for (std::size_t w : windows) {
    need(w >= 1 && lookback % w == 0,
         "window " + std::to_string(w) + " does not divide lookback " + std::to_string(lookback));
    need(seen.insert(w).second, "window " + std::to_string(w) + " listed twice");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_nodes", c.n_nodes},         {"n_features", c.n_features},
                     {"lookback", c.lookback},       {"horizon", c.horizon},
                     {"hidden", c.hidden},           {"hyperedges", c.hyperedges},
                     {"prior_layers", c.prior_layers}, {"hyper_layers", c.hyper_layers},
                     {"mhce_layers", c.mhce_layers}, {"windows", c.windows}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("n_nodes").get_to(c.n_nodes);
  j.at("n_features").get_to(c.n_features);
  j.at("lookback").get_to(c.lookback);
  j.at("horizon").get_to(c.horizon);
  j.at("hidden").get_to(c.hidden);
  j.at("hyperedges").get_to(c.hyperedges);
  j.at("prior_layers").get_to(c.prior_layers);
  j.at("hyper_layers").get_to(c.hyper_layers);
  j.at("mhce_layers").get_to(c.mhce_layers);
  j.at("windows").get_to(c.windows);
}

Var temporal_pool(Var h, std::size_t n_nodes, std::size_t window) { return temporal_max_pool(h, n_nodes, window); }

Var mhce_layer(Var h, const TemporalGraph& g, const ScaleVars& p, std::size_t hyper_layers,
               std::vector<Tensor>* incidence_trace) {
  Var hyper = dhsl_block(h, p.hyper, hyper_layers, incidence_trace);
  Var interactive = igc_block(h, g, p.igc);
  return scale(add(hyper, interactive), 0.5);
}

Var fuse_scales(const std::vector<Var>& per_scale, const FusionVars& p) {
  if (per_scale.size() != p.logits.value().size()) {
    throw DimensionError("fuse_scales: " + std::to_string(per_scale.size()) + " scales but " +
                         std::to_string(p.logits.value().size()) + " fusion logits");
  }
  return weighted_sum(per_scale, softmax(p.logits));
}

Var forecast_head(Var global, Var last_state, const ReadoutVars& p) {
  return transpose(add_row_bias(matmul(concat_cols(global, last_state), p.weight), p.bias));
}

ModelParameters zero_parameters(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.hidden, hi = c.hyperedges;
  ModelParameters p;
  p.encoder.input_proj = Tensor::zeros(c.n_features, d);
  p.encoder.spatial_emb = Tensor::zeros(c.n_nodes, d);
  p.encoder.temporal_emb = Tensor::zeros(c.lookback, d);
  p.encoder.layers.assign(c.prior_layers, Tensor::zeros(d, d));
  ScaleParams sp;
  sp.hyper.incidence_factor = Tensor::zeros(d, hi);
  sp.hyper.hyperedge_relations = Tensor::zeros(hi, hi);
  sp.igc.w1 = sp.igc.w2 = sp.igc.w3 = Tensor::zeros(d, d);
  p.scales.assign(c.windows.size(), sp);
  p.fusion.logits = Tensor::zeros(1, c.windows.size());
  p.readout.weight = Tensor::zeros(2 * d, c.horizon);
  p.readout.bias = Tensor::zeros(1, c.horizon);
  return p;
}

ModelParameters init_parameters(const ModelConfig& c, std::uint64_t seed) {
  ModelParameters p = zero_parameters(c);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](Tensor& t, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : t.values()) v = dist(rng);
  };
  auto glorot = [&](Tensor& t) { fill_uniform(t, std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()))); };
  // Matrices feeding a ReLU get He scaling.
  auto he = [&](Tensor& t) { fill_uniform(t, std::sqrt(6.0 / static_cast<double>(t.rows()))); };

  const double d = static_cast<double>(c.hidden);
  glorot(p.encoder.input_proj);
  fill_uniform(p.encoder.spatial_emb, 1.0 / std::sqrt(d));
  fill_uniform(p.encoder.temporal_emb, 1.0 / std::sqrt(d));
  for (Tensor& w : p.encoder.layers) he(w);
  for (std::size_t j = 0; j < c.windows.size(); ++j) {
    ScaleParams& sp = p.scales[j];
    // The hypergraph update is cubic in the states and sums over every pooled
    // observation; this scale keeps its output near the input magnitude.
    const double rows = static_cast<double>(c.n_nodes * (c.lookback / c.windows[j]));
    const double spread = std::sqrt(3.0 / (rows * std::sqrt(d * static_cast<double>(c.hyperedges))));
    fill_uniform(sp.hyper.incidence_factor, spread);
    glorot(sp.hyper.hyperedge_relations);
    glorot(sp.igc.w1);
    glorot(sp.igc.w2);
    he(sp.igc.w3);
  }
  glorot(p.readout.weight);
  return p;
}

void check_parameter_layout(const ModelConfig& config, const ModelParameters& params) {
  const ModelParameters expected = zero_parameters(config);
  std::vector<std::pair<std::string, Shape>> want, got;
  for_each_param(expected, [&](const std::string& n, const Tensor& t) { want.emplace_back(n, t.shape()); });
  for_each_param(params, [&](const std::string& n, const Tensor& t) { got.emplace_back(n, t.shape()); });
  if (want.size() != got.size()) {
    throw DimensionError("parameter set has " + std::to_string(got.size()) + " tensors, model expects " +
                         std::to_string(want.size()));
  }
  for (std::size_t k = 0; k < want.size(); ++k) {
    if (want[k] != got[k]) {
      throw DimensionError("parameter " + got[k].first + " has shape " + shape_string(got[k].second) +
                           ", model expects " + want[k].first + " " + shape_string(want[k].second));
    }
  }
}

DyHSLModel::DyHSLModel(ModelConfig config, RoadNetwork network) : config_(std::move(config)), network_(std::move(network)) {
  config_.validate();
  if (network_.n_nodes() != config_.n_nodes) {
    throw ConfigError("road network has " + std::to_string(network_.n_nodes()) + " nodes, model expects " +
                      std::to_string(config_.n_nodes));
  }
  for (std::size_t w : config_.windows) {
    const std::size_t steps = config_.lookback / w;
    if (!graphs_.contains(steps)) graphs_.emplace(steps, normalize_adjacency(build_temporal_graph(network_, steps)));
  }
  if (!graphs_.contains(config_.lookback)) {
    graphs_.emplace(config_.lookback, normalize_adjacency(build_temporal_graph(network_, config_.lookback)));
  }
}

const TemporalGraph& DyHSLModel::graph(std::size_t t_steps) const {
  auto it = graphs_.find(t_steps);
  if (it == graphs_.end()) throw ContractError("no temporal graph for " + std::to_string(t_steps) + " steps");
  return it->second;
}

namespace {

// Re-throws library errors with the failing stage prepended.
template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  auto prefix = [&](const std::exception& e) { return std::string(stage) + ": " + e.what(); };
  try {
    return f();
  } catch (const DimensionError& e) {
    throw DimensionError(prefix(e));
  } catch (const ContractError& e) {
    throw ContractError(prefix(e));
  } catch (const NumericError& e) {
    throw NumericError(prefix(e));
  } catch (const ConfigError& e) {
    throw ConfigError(prefix(e));
  }
}

}  // namespace

Var DyHSLModel::forward(Tape& tape, const ModelVars& params, const Tensor& window, ForwardTrace* trace) const {
  const ModelConfig& c = config_;
  const std::size_t n = c.n_nodes;
  if (window.rank() != 3 || window.shape()[0] != c.lookback || window.shape()[1] != n ||
      window.shape()[2] != c.n_features) {
    throw DimensionError("dyhsl_forward: window " + shape_string(window.shape()) + " does not match model " +
                         shape_string({c.lookback, n, c.n_features}));
  }
  if (params.scales.size() != c.windows.size()) {
    throw DimensionError("dyhsl_forward: " + std::to_string(params.scales.size()) + " scale parameter sets for " +
                         std::to_string(c.windows.size()) + " windows");
  }
  if (trace) trace->incidence.assign(c.windows.size(), {});

  Var h = in_stage("encoder", [&] {
    return prior_graph_convolution(build_node_features(tape, window, params.encoder), graph(c.lookback),
                                   params.encoder);
  });

  std::vector<Var> per_scale;
  for (std::size_t j = 0; j < c.windows.size(); ++j) {
    const std::size_t eps = c.windows[j];
    per_scale.push_back(in_stage("multiscale", [&] {
      const TemporalGraph& g = graph(c.lookback / eps);
      Var delta = temporal_pool(h, n, eps);
      for (std::size_t l = 0; l < c.mhce_layers; ++l) {
        delta = mhce_layer(delta, g, params.scales[j], c.hyper_layers, trace ? &trace->incidence[j] : nullptr);
      }
      return time_mean_pool(delta, n);
    }));
  }

  return in_stage("readout", [&] {
    Var global = fuse_scales(per_scale, params.fusion);
    std::vector<std::size_t> last_rows(n);
    for (std::size_t i = 0; i < n; ++i) last_rows[i] = temporal_index(i, c.lookback - 1, n);
    return forecast_head(global, gather_rows(h, std::move(last_rows)), params.readout);
  });
}

Tensor DyHSLModel::predict(const ModelParameters& params, const Tensor& window, ForwardTrace* trace) const {
  Tape tape;
  ModelVars vars = map_params<Var>(params, [&](const std::string&, const Tensor& t) { return tape.constant(t); });
  return forward(tape, vars, window, trace).value();
}

Var dyhsl_forward(Tape& tape, const DyHSLModel& model, const ModelVars& params, const Tensor& window,
                  ForwardTrace* trace) {
  return model.forward(tape, params, window, trace);
}

}  // namespace dyhsl
