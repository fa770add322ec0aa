#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dyhsl/dataio.hpp"
#include "dyhsl/multiscale.hpp"
#include "dyhsl/params.hpp"
#include "dyhsl/tape.hpp"

namespace dyhsl {

/// Mean absolute error over all entries; subgradient 0 at ties.
Var mae_loss(Var pred, Var target);

/// Error metrics in de-normalized units. `mape` is a percentage over entries
/// whose target is non-zero; it is empty when every target is zero.
struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;
  std::size_t count = 0;
};

/// Streaming accumulation of MetricReport over many prediction blocks.
class MetricAccumulator {
 public:
  void add(const Tensor& pred, const Tensor& target);
  void merge(const MetricAccumulator& other);
  MetricReport report() const;

 private:
  double abs_sum_ = 0.0;
  double sq_sum_ = 0.0;
  double pct_sum_ = 0.0;
  std::size_t count_ = 0;
  std::size_t pct_count_ = 0;
};

MetricReport evaluate(const Tensor& pred, const Tensor& target);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Chronological 60/20/20: floor for train and validation, remainder to test.
SplitCounts split_counts(std::size_t n_windows);

struct DataSplit {
  std::vector<ForecastSample> train;
  std::vector<ForecastSample> val;
  std::vector<ForecastSample> test;
};

/// Splits windows (ordered by start) without shuffling; needs >= 5 windows.
DataSplit split_dataset(std::vector<ForecastSample> samples);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction; one moment pair per parameter tensor.
class Adam {
 public:
  Adam(const ModelParameters& like, AdamOptions options);
  void step(ModelParameters& params, const ModelParameters& grads);
  std::size_t steps() const noexcept { return steps_; }

 private:
  AdamOptions options_;
  ModelParameters first_;
  ModelParameters second_;
  std::size_t steps_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  AdamOptions adam;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm;
  std::size_t workers = 1;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  MetricReport metrics;
};

struct FitResult {
  ModelParameters params;  // best on validation
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
};

// Samples view raw signals; windows are z-scored with `stats` on the way in,
// the loss is taken in normalized units and metrics in raw units.

/// Loss and summed parameter gradients of a set of samples, plus the
/// de-normalized metrics of their predictions.
struct BatchGradient {
  double loss_sum = 0.0;
  ModelParameters grad_sum;
  MetricAccumulator metrics;
};

BatchGradient batch_gradient(const DyHSLModel& model, const ModelParameters& params,
                             const std::vector<const ForecastSample*>& batch, const NormStats& stats,
                             std::size_t workers = 1);

/// Mini-batch Adam on the MAE loss with seeded shuffling; keeps the
/// parameters with the lowest validation MAE. Deterministic for a fixed seed
/// and a single worker.
FitResult fit(const DyHSLModel& model, ModelParameters init, const DataSplit& data, const NormStats& stats,
              const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

/// De-normalized predictions for one sample, T' x N.
Tensor predict_denormalized(const DyHSLModel& model, const ModelParameters& params, const ForecastSample& sample,
                            const NormStats& stats);

MetricReport evaluate_model(const DyHSLModel& model, const ModelParameters& params,
                            const std::vector<ForecastSample>& samples, const NormStats& stats,
                            std::size_t workers = 1);

/// Historical average: every horizon step predicts the mean of the node's
/// lookback flow values (uniform weights). Returns horizon x N.
Tensor ha_baseline(const Tensor& window, std::size_t horizon);

/// HA metrics over raw (un-normalized) samples.
MetricReport evaluate_ha(const std::vector<ForecastSample>& samples);

}  // namespace dyhsl
