#include "dyhsl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "dyhsl/error.hpp"

namespace dyhsl {
namespace {

RoadNetwork bench_network(std::size_t n, std::size_t degree, std::mt19937_64& rng) {
  degree = std::min(degree, n - 1);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> targets;
    while (targets.size() < degree) {
      const std::size_t j = pick(rng);
      if (j != i && std::find(targets.begin(), targets.end(), j) == targets.end()) targets.push_back(j);
    }
    for (std::size_t j : targets) edges.push_back({i, j, weight(rng)});
  }
  return RoadNetwork(n, std::move(edges));
}

BenchRow time_forward(const BenchOptions& o, std::size_t n, std::size_t steps, std::mt19937_64& rng) {
  ModelConfig cfg = o.base;
  cfg.n_nodes = n;
  cfg.lookback = steps;
  cfg.windows = common_windows(o.base.windows, o.step_counts);
  cfg.validate();
  const RoadNetwork net = bench_network(n, o.out_degree, rng);
  const DyHSLModel model(cfg, net);
  const ModelParameters params = init_parameters(cfg, rng());
  Tensor window({steps, n, cfg.n_features});
  std::normal_distribution<double> dist;
  for (double& v : window.values()) v = dist(rng);

  model.predict(params, window);  // warm the graph cache
  std::vector<double> times;
  for (std::size_t r = 0; r < std::max<std::size_t>(o.repeats, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    model.predict(params, window);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return {n, steps, net.nnz(), times[times.size() / 2]};
}

}  // namespace

std::vector<std::size_t> common_windows(const std::vector<std::size_t>& wanted,
                                        const std::vector<std::size_t>& step_counts) {
  std::vector<std::size_t> out;
  for (std::size_t w : wanted) {
    if (w > 0 && std::all_of(step_counts.begin(), step_counts.end(), [w](std::size_t t) { return t % w == 0; })) {
      out.push_back(w);
    }
  }
  if (out.empty()) out.push_back(1);
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need at least two paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ContractError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

BenchResult run_bench(const BenchOptions& o) {
  if (o.node_counts.size() < 2 || o.step_counts.size() < 2) {
    throw ConfigError("bench: need at least two node counts and two step counts");
  }
  std::mt19937_64 rng(o.seed);
  BenchResult result;
  std::vector<double> t, t_sec, nnz, nnz_sec;
  for (std::size_t steps : o.step_counts) {
    result.rows.push_back(time_forward(o, o.reference_nodes, steps, rng));
    t.push_back(static_cast<double>(steps));
    t_sec.push_back(result.rows.back().seconds);
  }
  for (std::size_t n : o.node_counts) {
    result.rows.push_back(time_forward(o, n, o.reference_steps, rng));
    nnz.push_back(static_cast<double>(result.rows.back().nnz));
    nnz_sec.push_back(result.rows.back().seconds);
  }
  result.slope_steps = loglog_slope(t, t_sec);
  result.slope_nnz = loglog_slope(nnz, nnz_sec);
  return result;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
  out << "n,t,nnz,seconds\n";
  for (const BenchRow& r : result.rows) out << r.n_nodes << ',' << r.steps << ',' << r.nnz << ',' << r.seconds << '\n';
}

}  // namespace dyhsl
