#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "dyhsl/error.hpp"
#include "dyhsl/learning.hpp"

using namespace dyhsl;

namespace {

struct Fixture {
  ModelConfig config;
  std::shared_ptr<const SignalTensor> signals;
  RoadNetwork network;
  NormStats stats;
  DataSplit split;
};

Fixture small_problem(std::size_t steps = 60) {
  SynthConfig sc;
  sc.n_nodes = 4;
  sc.n_communities = 2;
  sc.t_total = steps;
  sc.period = 24;
  sc.seed = 11;
  SynthData data = synth_generate(sc);
  Fixture f;
  f.config.n_nodes = 4;
  f.config.lookback = 4;
  f.config.horizon = 2;
  f.config.hidden = 4;
  f.config.hyperedges = 2;
  f.config.prior_layers = 1;
  f.config.mhce_layers = 1;
  f.config.windows = {1, 2};
  f.signals = std::make_shared<const SignalTensor>(std::move(data.signals));
  f.network = std::move(data.network);
  f.split = split_dataset(make_windows(f.signals, 4, 2));
  f.stats = compute_norm_stats(*f.signals, 0, f.split.train.back().end() + 1);
  return f;
}

}  // namespace

TEST(MaeLoss, Example) {
  Tape tape;
  const Var loss = mae_loss(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})), tape.constant(Tensor::matrix({{2, 2}, {0, 5}})));
  EXPECT_DOUBLE_EQ(loss.value()[0], 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(mae_loss(tape.constant(Tensor::row({1, -1})), tape.constant(Tensor::row({2, -3}))).value()[0], 1.5);
}

TEST(Metrics, Examples) {
  const MetricReport r = evaluate(Tensor::row({110, 90}), Tensor::row({100, 100}));
  EXPECT_DOUBLE_EQ(r.mae, 10.0);
  EXPECT_DOUBLE_EQ(r.rmse, 10.0);
  ASSERT_TRUE(r.mape.has_value());
  EXPECT_DOUBLE_EQ(*r.mape, 10.0);
  EXPECT_EQ(r.count, 2u);

  EXPECT_FALSE(evaluate(Tensor::row({1, 2}), Tensor::row({0, 0})).mape.has_value());
  const MetricReport masked = evaluate(Tensor::row({5, 12}), Tensor::row({0, 10}));
  ASSERT_TRUE(masked.mape.has_value());
  EXPECT_DOUBLE_EQ(*masked.mape, 20.0);
  EXPECT_DOUBLE_EQ(masked.mae, 3.5);

  EXPECT_THROW(evaluate(Tensor::row({1, 2}), Tensor::row({1})), DimensionError);
}

TEST(Metrics, RmseDominatesMaeAndAccumulatesExactly) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = Tensor::zeros(3, 4), b = Tensor::zeros(3, 4);
    for (double& v : a.values()) v = dist(rng);
    for (double& v : b.values()) v = dist(rng);
    const MetricReport whole = evaluate(a, b);
    EXPECT_GE(whole.rmse, whole.mae - 1e-12);

    MetricAccumulator first, second;
    first.add(Tensor::matrix({{a(0, 0), a(0, 1)}}), Tensor::matrix({{b(0, 0), b(0, 1)}}));
    second.add(Tensor::matrix({{a(1, 0), a(1, 1)}}), Tensor::matrix({{b(1, 0), b(1, 1)}}));
    first.merge(second);
    double abs = 0.0;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) abs += std::abs(a(r, c) - b(r, c));
    EXPECT_NEAR(first.report().mae, abs / 4.0, 1e-12);
  }
}

TEST(Split, Counts) {
  auto check = [](std::size_t n, std::size_t tr, std::size_t va, std::size_t te) {
    const SplitCounts c = split_counts(n);
    EXPECT_EQ(c.train, tr) << n;
    EXPECT_EQ(c.val, va) << n;
    EXPECT_EQ(c.test, te) << n;
  };
  check(10, 6, 2, 2);
  check(100, 60, 20, 20);
  check(11, 6, 2, 3);
  check(5, 3, 1, 1);
  EXPECT_THROW(split_counts(4), DataError);
}

TEST(Split, ChronologicalAndDisjoint) {
  const Fixture f = small_problem();
  const std::size_t total = f.split.train.size() + f.split.val.size() + f.split.test.size();
  EXPECT_EQ(total, 60u - 4 - 2 + 1);
  EXPECT_EQ(f.split.train.front().start(), 0u);
  EXPECT_EQ(f.split.val.front().start(), f.split.train.back().start() + 1);
  EXPECT_EQ(f.split.test.front().start(), f.split.val.back().start() + 1);
}

TEST(Adam, FirstStepClosedForm) {
  ModelConfig c;
  c.n_nodes = 2;
  c.lookback = 2;
  c.horizon = 1;
  c.hidden = 2;
  c.hyperedges = 1;
  c.prior_layers = 1;
  c.mhce_layers = 1;
  c.windows = {1};
  ModelParameters params = init_parameters(c, 1);
  const ModelParameters before = params;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> dist(0.0, 1.0);
  ModelParameters grads = map_params<Tensor>(params, [&](const std::string&, const Tensor& t) {
    Tensor g(t.shape());
    for (double& v : g.values()) v = dist(rng);
    return g;
  });
  AdamOptions opt;
  opt.learning_rate = 0.01;
  Adam adam(params, opt);
  adam.step(params, grads);
  EXPECT_EQ(adam.steps(), 1u);

  std::vector<double> p0, p1, g;
  for_each_param(before, [&](const std::string&, const Tensor& t) { p0.insert(p0.end(), t.values().begin(), t.values().end()); });
  for_each_param(params, [&](const std::string&, const Tensor& t) { p1.insert(p1.end(), t.values().begin(), t.values().end()); });
  for_each_param(grads, [&](const std::string&, const Tensor& t) { g.insert(g.end(), t.values().begin(), t.values().end()); });
  for (std::size_t k = 0; k < p0.size(); ++k) {
    // After one step both moment estimates are exactly g and g^2.
    EXPECT_NEAR(p1[k], p0[k] - 0.01 * g[k] / (std::abs(g[k]) + 1e-8), 1e-12);
  }
}

TEST(Adam, ZeroLearningRateKeepsParameters) {
  const Fixture f = small_problem();
  const DyHSLModel model(f.config, f.network);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.adam.learning_rate = 0.0;
  const ModelParameters init = init_parameters(f.config, 3);
  const FitResult r = fit(model, init, f.split, f.stats, tc);
  for_each_param(r.params, [&, k = std::size_t{0}](const std::string& name, const Tensor& t) mutable {
    std::vector<const Tensor*> ref;
    for_each_param(init, [&](const std::string&, const Tensor& x) { ref.push_back(&x); });
    EXPECT_EQ(t, *ref[k++]) << name;
  });
}

TEST(Fit, ZeroEpochsReturnsInit) {
  const Fixture f = small_problem();
  const DyHSLModel model(f.config, f.network);
  TrainConfig tc;
  tc.epochs = 0;
  const ModelParameters init = init_parameters(f.config, 4);
  const FitResult r = fit(model, init, f.split, f.stats, tc);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.steps, 0u);
  EXPECT_EQ(r.params.readout.weight, init.readout.weight);
}

TEST(Fit, DeterministicForFixedSeed) {
  const Fixture f = small_problem();
  const DyHSLModel model(f.config, f.network);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.adam.learning_rate = 0.01;
  tc.seed = 5;
  const FitResult a = fit(model, init_parameters(f.config, 5), f.split, f.stats, tc);
  const FitResult b = fit(model, init_parameters(f.config, 5), f.split, f.stats, tc);
  ASSERT_EQ(a.history.size(), 4u);
  EXPECT_EQ(a.steps, 2 * ((f.split.train.size() + 7) / 8));
  for (std::size_t k = 0; k < a.history.size(); ++k) EXPECT_EQ(a.history[k].metrics.mae, b.history[k].metrics.mae);
  EXPECT_EQ(a.params.scales[1].igc.w2, b.params.scales[1].igc.w2);
}

TEST(Fit, MaxStepsAndValidation) {
  const Fixture f = small_problem();
  const DyHSLModel model(f.config, f.network);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  tc.max_steps = 3;
  EXPECT_EQ(fit(model, init_parameters(f.config, 6), f.split, f.stats, tc).steps, 3u);
  tc.batch_size = 0;
  EXPECT_THROW(fit(model, init_parameters(f.config, 6), f.split, f.stats, tc), ConfigError);
  tc.batch_size = 4;
  tc.adam.learning_rate = -1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Fit, ParallelGradientsMatchSerial) {
  const Fixture f = small_problem();
  const DyHSLModel model(f.config, f.network);
  const ModelParameters params = init_parameters(f.config, 7);
  std::vector<const ForecastSample*> batch;
  for (std::size_t k = 0; k < 6; ++k) batch.push_back(&f.split.train[k]);
  const BatchGradient one = batch_gradient(model, params, batch, f.stats, 1);
  const BatchGradient three = batch_gradient(model, params, batch, f.stats, 3);
  EXPECT_NEAR(one.loss_sum, three.loss_sum, 1e-12);
  EXPECT_LT(max_abs_diff(one.grad_sum.readout.weight, three.grad_sum.readout.weight), 1e-12);
}

TEST(HistoricalAverage, Examples) {
  Tensor window({3, 2, 1});
  for (std::size_t t = 0; t < 3; ++t) {
    window(t, 0, 0) = 7.0;
    window(t, 1, 0) = static_cast<double>(t);
  }
  const Tensor ha = ha_baseline(window, 4);
  EXPECT_EQ(ha.shape(), (Shape{4, 2}));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(ha(k, 0), 7.0);
    EXPECT_EQ(ha(k, 1), 1.0);
  }
}

TEST(HistoricalAverage, ConstantSeriesIsExact) {
  auto signals = std::make_shared<const SignalTensor>(SignalMeta{20, 2, 1, 5.0}, Tensor::filled({20, 2, 1}, 3.0));
  const MetricReport r = evaluate_ha(make_windows(signals, 4, 2));
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
}
