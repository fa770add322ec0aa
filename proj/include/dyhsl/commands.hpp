#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dyhsl/multiscale.hpp"

namespace dyhsl {

/// Options shared by every subcommand. Defaults follow the reference
/// training setup (batch 32, lr 0.001, d 64, 32 hyperedges, 6 prior layers).
struct RunOptions {
  std::filesystem::path data;
  std::filesystem::path edges;
  std::filesystem::path out = ".";
  std::filesystem::path checkpoint;
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t d = 64;
  std::size_t hyperedges = 32;
  std::vector<std::size_t> windows{1, 2, 3, 4, 6, 12};
  std::size_t lp = 6;
  std::size_t lh = 1;
  std::size_t ls = 2;
  std::size_t horizon = 12;
  std::size_t lookback = 12;
  std::size_t workers = 1;
  std::size_t max_steps = 0;
  std::optional<double> clip_norm;
  /// Split used by eval / predict: train, val, test or all.
  std::string split = "test";
  /// Window (index into all windows) used by export-incidence.
  std::size_t window_index = 0;

  // synth
  std::size_t nodes = 30;
  std::size_t communities = 3;
  std::size_t steps = 4032;

  // verify
  bool corrupt_grad = false;

  // bench
  std::size_t repeats = 5;

  /// Model configuration for a dataset with `n_nodes` nodes and `n_features`
  /// channels. Throws ConfigError on invalid combinations.
  ModelConfig model_config(std::size_t n_nodes, std::size_t n_features) const;
};

// Each command writes human-readable progress to `log` and returns a process
// exit code. Errors from the library propagate as exceptions.
int cmd_train(const RunOptions& o, std::ostream& log);
int cmd_eval(const RunOptions& o, std::ostream& log);
int cmd_predict(const RunOptions& o, std::ostream& log);
int cmd_synth(const RunOptions& o, std::ostream& log);
int cmd_verify(const RunOptions& o, std::ostream& log);
int cmd_bench(const RunOptions& o, std::ostream& log);
int cmd_export_incidence(const RunOptions& o, std::ostream& log);

}  // namespace dyhsl
