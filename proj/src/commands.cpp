#include "dyhsl/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "dyhsl/bench.hpp"
#include "dyhsl/checkpoint.hpp"
#include "dyhsl/config_json.hpp"
#include "dyhsl/dataio.hpp"
#include "dyhsl/error.hpp"
#include "dyhsl/learning.hpp"
#include "dyhsl/verify.hpp"

namespace dyhsl {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

void require_path(const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

json metrics_json(const MetricReport& m, const std::string& prefix) {
  json j;
  j[prefix + "mae"] = m.mae;
  j[prefix + "rmse"] = m.rmse;
  j[prefix + "mape"] = m.mape ? json(*m.mape) : json(nullptr);
  return j;
}

std::string mape_text(const MetricReport& m) {
  if (!m.mape) return "";
  std::ostringstream s;
  s << std::setprecision(17) << *m.mape;
  return s.str();
}

struct Dataset {
  std::shared_ptr<const SignalTensor> signals;
  RoadNetwork network;
  DataSplit split;
  std::vector<ForecastSample> all;
};

Dataset load_dataset(const RunOptions& o, std::size_t lookback, std::size_t horizon) {
  require_path(o.data, "--data");
  require_path(o.edges, "--edges");
  auto [signals, network] = ingest(o.data, o.edges);
  Dataset ds{std::make_shared<const SignalTensor>(std::move(signals)), std::move(network), {}, {}};
  ds.all = make_windows(ds.signals, lookback, horizon);
  ds.split = split_dataset(ds.all);
  return ds;
}

/// Statistics over every time row a training window touches.
NormStats train_stats(const Dataset& ds) {
  return compute_norm_stats(*ds.signals, 0, ds.split.train.back().end() + 1);
}

const std::vector<ForecastSample>& pick_split(const Dataset& ds, const std::string& name) {
  if (name == "train") return ds.split.train;
  if (name == "val") return ds.split.val;
  if (name == "test") return ds.split.test;
  if (name == "all") return ds.all;
  throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
}

Checkpoint load_matching(const RunOptions& o, const SignalMeta& meta) {
  require_path(o.checkpoint, "--checkpoint");
  Checkpoint ckpt = load_checkpoint(o.checkpoint);
  if (ckpt.config.n_nodes != meta.n_nodes) {
    throw DimensionError("checkpoint has N=" + std::to_string(ckpt.config.n_nodes) + " but data has N=" +
                         std::to_string(meta.n_nodes));
  }
  if (ckpt.config.n_features != meta.n_features) {
    throw DimensionError("checkpoint has F=" + std::to_string(ckpt.config.n_features) + " but data has F=" +
                         std::to_string(meta.n_features));
  }
  return ckpt;
}

}  // namespace

ModelConfig RunOptions::model_config(std::size_t n_nodes, std::size_t n_features) const {
  ModelConfig c;
  c.n_nodes = n_nodes;
  c.n_features = n_features;
  c.lookback = lookback;
  c.horizon = horizon;
  c.hidden = d;
  c.hyperedges = hyperedges;
  c.prior_layers = lp;
  c.hyper_layers = lh;
  c.mhce_layers = ls;
  c.windows = windows;
  c.validate();
  return c;
}

int cmd_train(const RunOptions& o, std::ostream& log) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.adam.learning_rate = o.lr;
  tc.seed = o.seed;
  tc.clip_norm = o.clip_norm;
  tc.workers = o.workers;
  tc.max_steps = o.max_steps;
  tc.validate();
  // Fail on bad model flags before reading any data.
  o.model_config(1, 1);

  const Dataset ds = load_dataset(o, o.lookback, o.horizon);
  const ModelConfig cfg = o.model_config(ds.network.n_nodes(), ds.signals->meta().n_features);
  const NormStats stats = train_stats(ds);
  const DyHSLModel model(cfg, ds.network);
  log << "train: " << ds.split.train.size() << " / val: " << ds.split.val.size()
      << " / test: " << ds.split.test.size() << " windows, " << parameter_count(init_parameters(cfg, 0))
      << " parameters\n";

  std::filesystem::create_directories(o.out);
  std::ofstream history = open_out(o.out / "history.csv");
  history << "epoch,split,mae,rmse,mape\n";
  const FitResult fit_result =
      fit(model, init_parameters(cfg, o.seed), ds.split, stats, tc, [&](const EpochRecord& r) {
        history << r.epoch << ',' << r.split << ',' << r.metrics.mae << ',' << r.metrics.rmse << ','
                << mape_text(r.metrics) << '\n';
        log << "epoch " << r.epoch << ' ' << r.split << " mae " << r.metrics.mae << '\n';
      });

  Checkpoint ckpt{cfg, fit_result.params, stats, json::object()};
  ckpt.extra["seed"] = o.seed;
  ckpt.extra["epochs"] = o.epochs;
  ckpt.extra["best_epoch"] = fit_result.best_epoch;
  ckpt.extra["steps"] = fit_result.steps;
  save_checkpoint(o.out / "model.ckpt", ckpt);

  const MetricReport test = evaluate_model(model, fit_result.params, ds.split.test, stats, o.workers);
  std::ofstream summary = open_out(o.out / "summary.json");
  summary << metrics_json(test, "test_").dump(2) << '\n';
  log << "test mae " << test.mae << " rmse " << test.rmse << '\n';
  return 0;
}

int cmd_eval(const RunOptions& o, std::ostream& log) {
  require_path(o.checkpoint, "--checkpoint");
  const Checkpoint probe = load_checkpoint(o.checkpoint);
  const Dataset ds = load_dataset(o, probe.config.lookback, probe.config.horizon);
  const Checkpoint ckpt = load_matching(o, ds.signals->meta());
  const DyHSLModel model(ckpt.config, ds.network);
  const auto& samples = pick_split(ds, o.split);
  const MetricReport m = evaluate_model(model, ckpt.params, samples, ckpt.stats, o.workers);
  const MetricReport ha = evaluate_ha(samples);
  json j = metrics_json(m, o.split + "_");
  j.update(metrics_json(ha, "ha_"));
  j["windows"] = samples.size();
  log << j.dump(2) << '\n';
  return 0;
}

int cmd_predict(const RunOptions& o, std::ostream& log) {
  require_path(o.checkpoint, "--checkpoint");
  const Checkpoint probe = load_checkpoint(o.checkpoint);
  const Dataset ds = load_dataset(o, probe.config.lookback, probe.config.horizon);
  const Checkpoint ckpt = load_matching(o, ds.signals->meta());
  const DyHSLModel model(ckpt.config, ds.network);
  std::filesystem::create_directories(o.out);
  const auto path = o.out / "predictions.csv";
  std::ofstream out = open_out(path);
  out << "t,node,y_true,y_pred\n";
  std::size_t rows = 0;
  for (const ForecastSample& s : pick_split(ds, o.split)) {
    const Tensor pred = predict_denormalized(model, ckpt.params, s, ckpt.stats);
    const Tensor target = s.target();
    for (std::size_t k = 0; k < s.horizon(); ++k) {
      for (std::size_t i = 0; i < ckpt.config.n_nodes; ++i) {
        out << s.start() + s.lookback() + k << ',' << i << ',' << target(k, i) << ',' << pred(k, i) << '\n';
        ++rows;
      }
    }
  }
  log << "wrote " << rows << " rows to " << path.string() << '\n';
  return 0;
}

int cmd_synth(const RunOptions& o, std::ostream& log) {
  SynthConfig sc;
  sc.n_nodes = o.nodes;
  sc.n_communities = o.communities;
  sc.t_total = o.steps;
  sc.seed = o.seed;
  const SynthData data = synth_generate(sc);
  std::filesystem::create_directories(o.out);
  write_signals(o.out / "signals.bin", data.signals);
  write_road_network_csv(o.out / "edges.csv", data.network);
  std::ofstream membership = open_out(o.out / "membership.csv");
  membership << "node,community\n";
  for (std::size_t i = 0; i < data.membership.size(); ++i) membership << i << ',' << data.membership[i] << '\n';
  log << "wrote " << sc.t_total << " steps x " << sc.n_nodes << " nodes to " << o.out.string() << '\n';
  return 0;
}

int cmd_verify(const RunOptions& o, std::ostream& log) {
  verify::VerifyOptions vo;
  vo.corrupt_w2_gradient = o.corrupt_grad;
  const auto results = verify::run_verification(vo);
  bool ok = true;
  for (const auto& r : results) {
    log << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(14) << r.family << r.name << "  observed "
        << std::scientific << std::setprecision(3) << r.observed << "  tolerance " << r.tolerance
        << std::defaultfloat << '\n';
    ok = ok && r.passed;
  }
  log << (ok ? "all oracles passed" : "oracle failures") << '\n';
  return ok ? 0 : 1;
}

int cmd_bench(const RunOptions& o, std::ostream& log) {
  BenchOptions bo;
  bo.base = o.model_config(1, 1);
  bo.repeats = o.repeats;
  bo.seed = o.seed;
  const BenchResult r = run_bench(bo);
  std::filesystem::create_directories(o.out);
  std::ofstream csv = open_out(o.out / "bench.csv");
  write_bench_csv(csv, r);
  write_bench_csv(log, r);
  log << "slope vs T: " << r.slope_steps << "\nslope vs nnz: " << r.slope_nnz << '\n';
  return 0;
}

int cmd_export_incidence(const RunOptions& o, std::ostream& log) {
  require_path(o.checkpoint, "--checkpoint");
  const Checkpoint probe = load_checkpoint(o.checkpoint);
  const Dataset ds = load_dataset(o, probe.config.lookback, probe.config.horizon);
  const Checkpoint ckpt = load_matching(o, ds.signals->meta());
  if (o.window_index >= ds.all.size()) {
    throw ConfigError("--window " + std::to_string(o.window_index) + " out of range (" +
                      std::to_string(ds.all.size()) + " windows)");
  }
  const auto& windows = ckpt.config.windows;
  const auto unit = std::find(windows.begin(), windows.end(), std::size_t{1});
  if (unit == windows.end()) throw ConfigError("export-incidence needs window size 1 in the model");
  const std::size_t scale = static_cast<std::size_t>(unit - windows.begin());

  const DyHSLModel model(ckpt.config, ds.network);
  ForwardTrace trace;
  model.predict(ckpt.params, ckpt.stats.normalize_window(ds.all[o.window_index].input()), &trace);
  const Tensor& lambda = trace.incidence.at(scale).at(0);
  const std::size_t n = ckpt.config.n_nodes;

  std::filesystem::create_directories(o.out);
  const auto path = o.out / "incidence.csv";
  std::ofstream out = open_out(path);
  out << "t,node,hyperedge,value\n";
  for (std::size_t row = 0; row < lambda.rows(); ++row)
    for (std::size_t e = 0; e < lambda.cols(); ++e) out << row / n << ',' << row % n << ',' << e << ',' << lambda(row, e) << '\n';
  log << "wrote " << lambda.rows() * lambda.cols() << " rows to " << path.string() << '\n';
  return 0;
}

}  // namespace dyhsl
