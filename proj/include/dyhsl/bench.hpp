#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dyhsl/multiscale.hpp"

namespace dyhsl {

struct BenchOptions {
  /// Sizes other than N, T and the windows are taken from here.
  ModelConfig base;
  /// Node counts swept at `reference_steps`; edges per node stay fixed so
  /// nnz(A) grows in proportion.
  std::vector<std::size_t> node_counts{64, 128, 256, 512};
  /// Lookback lengths swept at `reference_nodes`.
  std::vector<std::size_t> step_counts{6, 12, 24, 48};
  std::size_t reference_nodes = 128;
  std::size_t reference_steps = 12;
  std::size_t out_degree = 4;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t n_nodes = 0;
  std::size_t steps = 0;
  std::size_t nnz = 0;
  double seconds = 0.0;  // median forward time
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Least-squares slopes of log(seconds) against log(T) and log(nnz).
  double slope_steps = 0.0;
  double slope_nnz = 0.0;
};

/// Window sizes from `wanted` that divide every swept T; {1} if none do.
std::vector<std::size_t> common_windows(const std::vector<std::size_t>& wanted,
                                        const std::vector<std::size_t>& step_counts);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

BenchResult run_bench(const BenchOptions& options);

/// CSV with header n,t,nnz,seconds.
void write_bench_csv(std::ostream& out, const BenchResult& result);

}  // namespace dyhsl
