#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "dyhsl/tensor.hpp"
#include "dyhsl/topology.hpp"

namespace dyhsl {

struct SignalMeta {
  std::size_t n_timesteps = 0;
  std::size_t n_nodes = 0;
  std::size_t n_features = 0;
  double interval_minutes = 5.0;

  friend bool operator==(const SignalMeta&, const SignalMeta&) = default;
};

/// Traffic observations, T_total x N x F. Feature 0 is the flow channel.
class SignalTensor {
 public:
  SignalTensor() = default;
  /// Checks that `values` is finite and shaped like `meta`.
  SignalTensor(SignalMeta meta, Tensor values);

  const SignalMeta& meta() const noexcept { return meta_; }
  const Tensor& values() const noexcept { return values_; }
  double operator()(std::size_t t, std::size_t node, std::size_t feature) const { return values_(t, node, feature); }

 private:
  SignalMeta meta_;
  Tensor values_;
};

/// Sidecar path for a signal file: same stem, `.json` extension.
std::filesystem::path sidecar_path(const std::filesystem::path& signals_path);

/// Reads row-major little-endian float32 values plus the JSON sidecar
/// {"T","N","F","interval_minutes"}.
SignalTensor read_signals(const std::filesystem::path& signals_path);
void write_signals(const std::filesystem::path& signals_path, const SignalTensor& signals);

/// Loads signals and the `from,to,weight` edge CSV; both must agree on N.
std::pair<SignalTensor, RoadNetwork> ingest(const std::filesystem::path& signals_path,
                                            const std::filesystem::path& edges_path);

/// Per-feature mean and standard deviation.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  double normalize_flow(double v) const { return (v - mean.at(0)) / std.at(0); }
  double denormalize_flow(double z) const { return z * std.at(0) + mean.at(0); }
  /// Z-scores a T x N x F window feature by feature.
  Tensor normalize_window(const Tensor& window) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Statistics over time rows [row_begin, row_end); rejects constant features.
NormStats compute_norm_stats(const SignalTensor& x, std::size_t row_begin, std::size_t row_end);
SignalTensor zscore(const SignalTensor& x, const NormStats& stats);
SignalTensor inverse_zscore(const SignalTensor& x, const NormStats& stats);

/// One forecasting example: a view into a shared signal tensor covering
/// input rows [start, start + lookback) and target rows
/// [start + lookback, start + lookback + horizon).
class ForecastSample {
 public:
  ForecastSample(std::shared_ptr<const SignalTensor> source, std::size_t start, std::size_t lookback,
                 std::size_t horizon);

  std::size_t start() const noexcept { return start_; }
  /// Last time row covered by the window (the final target row).
  std::size_t end() const noexcept { return start_ + lookback_ + horizon_ - 1; }
  std::size_t lookback() const noexcept { return lookback_; }
  std::size_t horizon() const noexcept { return horizon_; }
  const SignalTensor& source() const noexcept { return *source_; }

  /// lookback x N x F.
  Tensor input() const;
  /// horizon x N, flow channel only.
  Tensor target() const;

 private:
  std::shared_ptr<const SignalTensor> source_;
  std::size_t start_;
  std::size_t lookback_;
  std::size_t horizon_;
};

/// Stride-1 sliding windows ordered by start index; there are
/// T_total - lookback - horizon + 1 of them.
std::vector<ForecastSample> make_windows(std::shared_ptr<const SignalTensor> x, std::size_t lookback,
                                         std::size_t horizon);

struct SynthConfig {
  std::size_t n_nodes = 30;
  std::size_t n_communities = 3;
  std::size_t t_total = 4032;
  std::uint64_t seed = 0;
  std::size_t period = 288;       // one day of 5-minute steps
  double base_level = 200.0;
  double amplitude = 100.0;
  double noise = 5.0;             // std of i.i.d. Gaussian noise
  double event_rate = 1.0 / 144;  // per community per step
  double event_magnitude = 80.0;
  double event_decay = 6.0;       // steps
  std::size_t event_length = 24;  // steps
  std::size_t bridges = 1;        // extra edges between consecutive communities
};

struct SynthData {
  SignalTensor signals;
  RoadNetwork network;
  std::vector<std::size_t> membership;  // community of each node
};

/// Community-structured synthetic traffic: each community shares a daily
/// sinusoid with its own phase; transient events start at one member and
/// reach ring neighbours one step later per hop; Gaussian noise on top.
/// The road network is an intra-community ring plus sparse bridges.
SynthData synth_generate(const SynthConfig& config);

}  // namespace dyhsl
