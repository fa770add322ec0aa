#include "dyhsl/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "dyhsl/error.hpp"
#include "dyhsl/ops.hpp"

namespace dyhsl {

Var mae_loss(Var pred, Var target) { return mean_abs_error(pred, target); }

void MetricAccumulator::add(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("metrics: prediction " + shape_string(pred.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double err = pred[k] - target[k];
    abs_sum_ += std::abs(err);
    sq_sum_ += err * err;
    if (target[k] != 0.0) {
      pct_sum_ += std::abs(err) / std::abs(target[k]);
      ++pct_count_;
    }
  }
  count_ += pred.size();
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  abs_sum_ += other.abs_sum_;
  sq_sum_ += other.sq_sum_;
  pct_sum_ += other.pct_sum_;
  count_ += other.count_;
  pct_count_ += other.pct_count_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.count = count_;
  if (count_ == 0) return r;
  const double n = static_cast<double>(count_);
  r.mae = abs_sum_ / n;
  r.rmse = std::sqrt(sq_sum_ / n);
  if (pct_count_ > 0) r.mape = 100.0 * pct_sum_ / static_cast<double>(pct_count_);
  return r;
}

MetricReport evaluate(const Tensor& pred, const Tensor& target) {
  MetricAccumulator acc;
  acc.add(pred, target);
  return acc.report();
}

SplitCounts split_counts(std::size_t n) {
  if (n < 5) throw DataError("split_dataset: need at least 5 windows, got " + std::to_string(n));
  SplitCounts c;
  c.train = n * 6 / 10;
  c.val = n * 2 / 10;
  c.test = n - c.train - c.val;
  return c;
}

DataSplit split_dataset(std::vector<ForecastSample> samples) {
  const SplitCounts c = split_counts(samples.size());
  DataSplit s;
  auto first = samples.begin();
  s.train.assign(first, first + static_cast<std::ptrdiff_t>(c.train));
  s.val.assign(first + static_cast<std::ptrdiff_t>(c.train), first + static_cast<std::ptrdiff_t>(c.train + c.val));
  s.test.assign(first + static_cast<std::ptrdiff_t>(c.train + c.val), samples.end());
  return s;
}

namespace {

ModelParameters zeros_like(const ModelParameters& p) {
  return map_params<Tensor>(p, [](const std::string&, const Tensor& t) { return Tensor(t.shape()); });
}

}  // namespace

Adam::Adam(const ModelParameters& like, AdamOptions options)
    : options_(options), first_(zeros_like(like)), second_(zeros_like(like)) {}

void Adam::step(ModelParameters& params, const ModelParameters& grads) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  std::vector<Tensor*> p, m, v;
  std::vector<const Tensor*> g;
  for_each_param(params, [&](const std::string&, Tensor& x) { p.push_back(&x); });
  for_each_param(first_, [&](const std::string&, Tensor& x) { m.push_back(&x); });
  for_each_param(second_, [&](const std::string&, Tensor& x) { v.push_back(&x); });
  for_each_param(grads, [&](const std::string&, const Tensor& x) { g.push_back(&x); });
  if (p.size() != g.size()) throw DimensionError("Adam: gradient set does not match parameters");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k]->shape() != g[k]->shape()) throw DimensionError("Adam: gradient shape mismatch");
    for (std::size_t e = 0; e < p[k]->size(); ++e) {
      const double ge = (*g[k])[e];
      double& me = (*m[k])[e];
      double& ve = (*v[k])[e];
      me = options_.beta1 * me + (1.0 - options_.beta1) * ge;
      ve = options_.beta2 * ve + (1.0 - options_.beta2) * ge * ge;
      const double mhat = me / c1;
      const double vhat = ve / c2;
      (*p[k])[e] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("gradient clip threshold must be positive");
}

namespace {

Tensor denormalize(Tensor y, const NormStats& stats) {
  for (double& v : y.values()) v = stats.denormalize_flow(v);
  return y;
}

Tensor normalize_target(Tensor y, const NormStats& stats) {
  for (double& v : y.values()) v = stats.normalize_flow(v);
  return y;
}

void accumulate_into(ModelParameters& sum, const ModelParameters& add) {
  std::vector<Tensor*> dst;
  for_each_param(sum, [&](const std::string&, Tensor& t) { dst.push_back(&t); });
  std::size_t k = 0;
  for_each_param(add, [&](const std::string&, const Tensor& t) { *dst[k++] += t; });
}

BatchGradient chunk_gradient(const DyHSLModel& model, const ModelParameters& params,
                             std::span<const ForecastSample* const> chunk, const NormStats& stats) {
  BatchGradient out;
  out.grad_sum = zeros_like(params);
  for (const ForecastSample* s : chunk) {
    Tape tape;
    ModelVars vars = bind_parameters(tape, params);
    Var pred = model.forward(tape, vars, stats.normalize_window(s->input()));
    const Tensor target = s->target();
    Var loss = mae_loss(pred, tape.constant(normalize_target(target, stats)));
    tape.backward(loss);
    out.loss_sum += loss.value()[0];
    accumulate_into(out.grad_sum, collect_gradients(tape, vars));
    out.metrics.add(denormalize(pred.value(), stats), target);
  }
  return out;
}

}  // namespace

BatchGradient batch_gradient(const DyHSLModel& model, const ModelParameters& params,
                             const std::vector<const ForecastSample*>& batch, const NormStats& stats,
                             std::size_t workers) {
  const std::span<const ForecastSample* const> all(batch);
  workers = std::max<std::size_t>(1, std::min(workers, batch.size()));
  if (workers == 1) return chunk_gradient(model, params, all, stats);

  std::vector<BatchGradient> parts(workers);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  const std::size_t per = (batch.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = std::min(batch.size(), w * per);
    const std::size_t hi = std::min(batch.size(), lo + per);
    threads.emplace_back([&, w, lo, hi] {
      try {
        parts[w] = chunk_gradient(model, params, all.subspan(lo, hi - lo), stats);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  BatchGradient out = std::move(parts[0]);
  for (std::size_t w = 1; w < workers; ++w) {
    out.loss_sum += parts[w].loss_sum;
    accumulate_into(out.grad_sum, parts[w].grad_sum);
    out.metrics.merge(parts[w].metrics);
  }
  return out;
}

Tensor predict_denormalized(const DyHSLModel& model, const ModelParameters& params, const ForecastSample& sample,
                            const NormStats& stats) {
  return denormalize(model.predict(params, stats.normalize_window(sample.input())), stats);
}

MetricReport evaluate_model(const DyHSLModel& model, const ModelParameters& params,
                            const std::vector<ForecastSample>& samples, const NormStats& stats, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, samples.size()));
  std::vector<MetricAccumulator> parts(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t w) {
    try {
      for (std::size_t k = w; k < samples.size(); k += workers) {
        parts[w].add(predict_denormalized(model, params, samples[k], stats), samples[k].target());
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  MetricAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.report();
}

FitResult fit(const DyHSLModel& model, ModelParameters init, const DataSplit& data, const NormStats& stats,
              const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  check_parameter_layout(model.config(), init);
  FitResult result;
  result.params = init;
  if (config.epochs == 0) return result;
  if (data.train.empty()) throw DataError("fit: empty training split");

  std::mt19937_64 rng(config.seed);
  Adam adam(init, config.adam);
  ModelParameters current = std::move(init);
  std::vector<std::size_t> order(data.train.size());
  double best = std::numeric_limits<double>::infinity();
  bool done = false;

  auto record = [&](std::size_t epoch, const char* split, const MetricReport& m) {
    result.history.push_back({epoch, split, m});
    if (on_epoch) on_epoch(result.history.back());
  };

  for (std::size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    MetricAccumulator train_metrics;
    for (std::size_t lo = 0, batch_no = 0; lo < order.size(); lo += config.batch_size, ++batch_no) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      std::vector<const ForecastSample*> batch;
      for (std::size_t k = lo; k < hi; ++k) batch.push_back(&data.train[order[k]]);
      BatchGradient bg = batch_gradient(model, current, batch, stats, config.workers);
      const double inv = 1.0 / static_cast<double>(batch.size());
      const double loss = bg.loss_sum * inv;
      if (!std::isfinite(loss)) {
        throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      double norm_sq = 0.0;
      for_each_param(bg.grad_sum, [&](const std::string&, Tensor& g) {
        for (double& v : g.values()) {
          v *= inv;
          norm_sq += v * v;
        }
      });
      if (config.clip_norm && std::sqrt(norm_sq) > *config.clip_norm) {
        const double shrink = *config.clip_norm / std::sqrt(norm_sq);
        for_each_param(bg.grad_sum, [&](const std::string&, Tensor& g) {
          for (double& v : g.values()) v *= shrink;
        });
      }
      adam.step(current, bg.grad_sum);
      train_metrics.merge(bg.metrics);
      if (config.max_steps && adam.steps() >= config.max_steps) {
        done = true;
        break;
      }
    }
    record(epoch, "train", train_metrics.report());
    double score = train_metrics.report().mae;
    if (!data.val.empty()) {
      const MetricReport val = evaluate_model(model, current, data.val, stats, config.workers);
      record(epoch, "val", val);
      score = val.mae;
    }
    if (score < best) {
      best = score;
      result.params = current;
      result.best_epoch = epoch;
    }
  }
  result.steps = adam.steps();
  return result;
}

Tensor ha_baseline(const Tensor& window, std::size_t horizon) {
  if (window.rank() != 3 || window.shape()[0] == 0) {
    throw DimensionError("ha_baseline: expected a non-empty T x N x F window, got " + shape_string(window.shape()));
  }
  const std::size_t steps = window.shape()[0], nodes = window.shape()[1];
  Tensor out = Tensor::zeros(horizon, nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < steps; ++t) mean += window(t, i, 0);
    mean /= static_cast<double>(steps);
    for (std::size_t k = 0; k < horizon; ++k) out(k, i) = mean;
  }
  return out;
}

MetricReport evaluate_ha(const std::vector<ForecastSample>& samples) {
  MetricAccumulator acc;
  for (const ForecastSample& s : samples) acc.add(ha_baseline(s.input(), s.horizon()), s.target());
  return acc.report();
}

}  // namespace dyhsl
