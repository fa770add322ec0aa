#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "dyhsl/commands.hpp"
#include "dyhsl/error.hpp"

namespace {

void add_shared(CLI::App& app, dyhsl::RunOptions& o) {
  app.add_option("--data", o.data, "signal file (float32 .bin with .json sidecar)");
  app.add_option("--edges", o.edges, "edge list CSV with header from,to,weight");
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  app.add_option("--epochs", o.epochs)->capture_default_str();
  app.add_option("--batch-size", o.batch_size)->capture_default_str();
  app.add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--d", o.d, "hidden size")->capture_default_str();
  app.add_option("--hyperedges", o.hyperedges, "number of hyperedges I")->capture_default_str();
  app.add_option("--windows", o.windows, "temporal pooling windows")->delimiter(',')->capture_default_str();
  app.add_option("--lp", o.lp, "prior graph convolution layers")->capture_default_str();
  app.add_option("--lh", o.lh, "stacked hypergraph layers")->capture_default_str();
  app.add_option("--ls", o.ls, "multi-scale extraction layers")->capture_default_str();
  app.add_option("--horizon", o.horizon)->capture_default_str();
  app.add_option("--lookback", o.lookback)->capture_default_str();
  app.add_option("--workers", o.workers, "threads for batch gradients (1 = bit-reproducible)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DyHSL traffic forecasting"};
  app.require_subcommand(1);
  dyhsl::RunOptions o;
  std::map<CLI::App*, int (*)(const dyhsl::RunOptions&, std::ostream&)> handlers;

  auto* train = app.add_subcommand("train", "train a model and write model.ckpt, history.csv, summary.json");
  train->add_option("--max-steps", o.max_steps, "stop after this many optimizer steps (0 = no limit)");
  train->add_option("--clip-norm", o.clip_norm, "global gradient norm clip");
  handlers[train] = dyhsl::cmd_train;

  auto* eval = app.add_subcommand("eval", "metrics of a checkpoint on one split");
  auto* predict = app.add_subcommand("predict", "write predictions.csv (t,node,y_true,y_pred)");
  auto* exporter = app.add_subcommand("export-incidence", "dump the scale-1 incidence matrix of one window");
  for (auto* sub : {eval, predict, exporter}) sub->add_option("--checkpoint", o.checkpoint)->required();
  for (auto* sub : {eval, predict}) {
    sub->add_option("--split", o.split, "train, val, test or all")->capture_default_str();
  }
  exporter->add_option("--window", o.window_index, "window index over all windows")->capture_default_str();
  handlers[eval] = dyhsl::cmd_eval;
  handlers[predict] = dyhsl::cmd_predict;
  handlers[exporter] = dyhsl::cmd_export_incidence;

  auto* synth = app.add_subcommand("synth", "generate community-structured synthetic data");
  synth->add_option("--nodes", o.nodes)->capture_default_str();
  synth->add_option("--communities", o.communities)->capture_default_str();
  synth->add_option("--steps", o.steps)->capture_default_str();
  handlers[synth] = dyhsl::cmd_synth;

  auto* verify = app.add_subcommand("verify", "run every verification oracle");
  verify->add_flag("--corrupt-grad", o.corrupt_grad, "test hook: perturb the W2 gradient");
  handlers[verify] = dyhsl::cmd_verify;

  auto* bench = app.add_subcommand("bench", "time the forward pass over N and T");
  bench->add_option("--repeats", o.repeats)->capture_default_str();
  handlers[bench] = dyhsl::cmd_bench;

  for (auto& [sub, fn] : handlers) add_shared(*sub, o);

  CLI11_PARSE(app, argc, argv);
  for (auto& [sub, fn] : handlers) {
    if (!sub->parsed()) continue;
    try {
      return fn(o, std::cout);
    } catch (const dyhsl::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}
