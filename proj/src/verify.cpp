#include "dyhsl/verify.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "dyhsl/error.hpp"
#include "dyhsl/hyperstruct.hpp"
#include "dyhsl/interaction.hpp"
#include "dyhsl/learning.hpp"
#include "dyhsl/ops.hpp"
#include "dyhsl/reference.hpp"

namespace dyhsl::verify {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_nodes = 6;
  c.n_features = 1;
  c.lookback = 12;
  c.horizon = 4;
  c.hidden = 8;
  c.hyperedges = 4;
  c.prior_layers = 2;
  c.hyper_layers = 1;
  c.mhce_layers = 1;
  c.windows = {1, 2};
  return c;
}

RoadNetwork random_network(std::size_t n_nodes, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(density);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (std::size_t j = 0; j < n_nodes; ++j)
      if (i != j && keep(rng)) edges.push_back({i, j, weight(rng)});
  return RoadNetwork(n_nodes, std::move(edges));
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> dist(0.0, spread);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

ModelVars constants(Tape& tape, const ModelParameters& params) {
  return map_params<Var>(params, [&](const std::string&, const Tensor& t) { return tape.constant(t); });
}

}  // namespace

TinyProblem make_tiny_problem(std::uint64_t seed, const ModelConfig& config, double min_kink_margin) {
  std::mt19937_64 seeds(seed);
  for (std::uint64_t attempt = 0; attempt < 5000; ++attempt) {
    TinyProblem p;
    p.seed = attempt == 0 ? seed : seeds();
    std::mt19937_64 rng(p.seed);
    p.config = config;
    p.network = random_network(config.n_nodes, 0.35, rng);
    p.params = init_parameters(config, rng());
    // Non-zero fusion logits and readout bias so that every group matters.
    p.params.fusion.logits = random_tensor({1, config.windows.size()}, rng, 0.5);
    p.params.readout.bias = random_tensor({1, config.horizon}, rng, 0.5);
    p.window = random_tensor({config.lookback, config.n_nodes, config.n_features}, rng);
    p.target = random_tensor({config.horizon, config.n_nodes}, rng);

    DyHSLModel model(p.config, p.network);
    Tape tape;
    Var pred = model.forward(tape, constants(tape, p.params), p.window);
    mae_loss(pred, tape.constant(p.target));
    p.kink_margin = tape.kink_margin();
    // A horizon column whose residual signs cancel has an exactly zero bias
    // gradient, which finite differences can only resolve as roundoff.
    bool balanced = false;
    for (std::size_t k = 0; k < config.horizon; ++k) {
      int signs = 0;
      for (std::size_t i = 0; i < config.n_nodes; ++i) signs += pred.value()(k, i) > p.target(k, i) ? 1 : -1;
      balanced = balanced || signs == 0;
    }
    if (p.kink_margin >= min_kink_margin && !balanced) return p;
  }
  throw InternalError("make_tiny_problem: no non-degenerate instance after 5000 seeds");
}

double problem_loss(const DyHSLModel& model, const TinyProblem& p, const ModelParameters& params,
                    std::uint64_t* signature) {
  Tape tape;
  Var pred = model.forward(tape, constants(tape, params), p.window);
  const double loss = mae_loss(pred, tape.constant(p.target)).value()[0];
  if (signature) *signature = tape.branch_signature();
  return loss;
}

std::vector<GroupCheck> gradient_oracle(const TinyProblem& problem, const std::string& corrupt_group) {
  const DyHSLModel model(problem.config, problem.network);
  Tape tape;
  ModelVars vars = bind_parameters(tape, problem.params);
  Var loss = mae_loss(model.forward(tape, vars, problem.window), tape.constant(problem.target));
  const std::uint64_t base_signature = tape.branch_signature();
  tape.backward(loss);
  const ModelParameters grads = collect_gradients(tape, vars);

  std::vector<std::pair<std::string, const Tensor*>> analytic;
  for_each_param(grads, [&](const std::string& n, const Tensor& g) { analytic.emplace_back(n, &g); });

  std::vector<GroupCheck> out;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const std::string& name = analytic[k].first;
    Tensor g = *analytic[k].second;
    if (!corrupt_group.empty() && name.find(corrupt_group) != std::string::npos) {
      for (double& v : g.values()) v *= 1.01;
    }
    ModelParameters probe = problem.params;
    Tensor* slot = nullptr;
    std::size_t idx = 0;
    for_each_param(probe, [&](const std::string&, Tensor& t) {
      if (idx++ == k) slot = &t;
    });
    const Tensor theta = *slot;
    auto probe_at = [&](std::size_t e, double delta, bool& same) {
      (*slot)[e] = theta[e] + delta;
      std::uint64_t sig = 0;
      const double v = problem_loss(model, problem, probe, &sig);
      (*slot)[e] = theta[e];
      same = same && sig == base_signature;
      return v;
    };
    Tensor numeric(theta.shape());
    // Off the fusion logits the loss is a polynomial of degree at most three
    // along any one coordinate of a smooth piece, so the extrapolated
    // difference is exact there and a long step only cuts roundoff.
    const double step = name.find("fusion.logits") == std::string::npos ? kPolynomialStep : kSmoothStep;
    double smallest = step;
    bool crossed = false;
    for (std::size_t e = 0; e < theta.size(); ++e) {
      // Richardson-extrapolated central differences at h and h/2, with h
      // shrunk until all four probes stay on the base point's smooth piece.
      for (double h = step;; h /= 2.0) {
        bool same = true;
        const double d1 = (probe_at(e, h, same) - probe_at(e, -h, same)) / (2.0 * h);
        const double d2 = (probe_at(e, h / 2, same) - probe_at(e, -h / 2, same)) / h;
        numeric[e] = (4.0 * d2 - d1) / 3.0;
        smallest = std::min(smallest, h);
        if (same) break;
        if (h <= kMinStep) {
          crossed = true;
          break;
        }
      }
    }
    const GradCheckResult result = compare_gradients(g, numeric);
    out.push_back({name, result, smallest, crossed});
  }
  return out;
}

namespace {

OracleResult check(std::string family, std::string name, double observed, double tolerance) {
  return {std::move(family), std::move(name), observed, tolerance, observed <= tolerance};
}

OracleResult factorization_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_n(1, 5), pick_t(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = pick_n(rng), steps = pick_t(rng), d = 3;
    const RoadNetwork net = random_network(n, 0.5, rng);
    const TemporalGraph g = normalize_adjacency(build_temporal_graph(net, steps));
    const Tensor h = random_tensor({n * steps, d}, rng);
    const Tensor w1 = random_tensor({d, d}, rng), w2 = random_tensor({d, d}, rng);

    Tape tape;
    IGCVars p{tape.constant(w1), tape.constant(w2), tape.constant(Tensor::zeros(d, d))};
    const Tensor fast = interaction_product(tape.constant(h), g, p).value();
    const auto dense = reference::temporal_adjacency(net, steps, true);
    const Tensor slow = reference::to_tensor(
        reference::interaction_pairs(dense, reference::to_mat(h), reference::to_mat(w1), reference::to_mat(w2)));
    worst = std::max(worst, max_abs_diff(fast, slow));
  }
  return check("factorization", "pair double sum vs factorized product, 100 instances", worst, 1e-10);
}

OracleResult straight_line_oracle(std::uint64_t seed) {
  const TinyProblem p = make_tiny_problem(seed, tiny_config(), 0.0);
  const DyHSLModel model(p.config, p.network);
  const Tensor fast = model.predict(p.params, p.window);
  const Tensor slow = reference::forward(p.config, p.network, p.params, p.window);
  return check("straight-line", "forward vs independent transcription", max_abs_diff(fast, slow), 1e-9);
}

std::vector<OracleResult> structure_oracles(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OracleResult> out;

  double row_dev = 0.0;
  double nnz_mismatch = 0.0;
  std::uniform_int_distribution<std::size_t> pick_n(1, 50), pick_t(1, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = pick_n(rng), steps = pick_t(rng);
    const RoadNetwork net = random_network(n, 3.0 / static_cast<double>(n + 1), rng);
    const TemporalGraph g = normalize_adjacency(build_temporal_graph(net, steps));
    const std::size_t expected = steps * net.nnz() + n * steps + n * (steps - 1);
    nnz_mismatch += g.nnz() != expected ? 1.0 : 0.0;
    const SparseMatrix& a = *g.normalized();
    for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) s += it.value();
      row_dev = std::max(row_dev, std::abs(s - 1.0));
    }
  }
  out.push_back(check("structure", "normalized adjacency row sums", row_dev, 1e-9));
  out.push_back(check("structure", "nnz matches the counting formula (mismatches)", nnz_mismatch, 0.0));

  double sum_dev = 0.0, shift_dev = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t j = 1 + trial % 6;
    const Tensor logits = random_tensor({1, j}, rng, 3.0);
    Tensor shifted = logits;
    for (double& v : shifted.values()) v += 17.5;
    std::vector<Tensor> gammas;
    for (std::size_t s = 0; s < j; ++s) gammas.push_back(random_tensor({4, 3}, rng));
    Tape tape;
    std::vector<Var> terms;
    for (const Tensor& g : gammas) terms.push_back(tape.constant(g));
    const Tensor w = softmax(tape.constant(logits)).value();
    sum_dev = std::max(sum_dev, std::abs(std::accumulate(w.values().begin(), w.values().end(), 0.0) - 1.0));
    const Tensor a = fuse_scales(terms, FusionVars{tape.constant(logits)}).value();
    const Tensor b = fuse_scales(terms, FusionVars{tape.constant(shifted)}).value();
    shift_dev = std::max(shift_dev, max_abs_diff(a, b));
  }
  out.push_back(check("structure", "fusion weights sum to one", sum_dev, 1e-12));
  out.push_back(check("structure", "fusion invariant to logit shift", shift_dev, 1e-12));

  {
    Tape tape;
    const Tensor h = random_tensor({5 * 4, 3}, rng);
    out.push_back(check("structure", "window-1 pooling is the identity",
                        max_abs_diff(temporal_pool(tape.constant(h), 5, 1).value(), h), 0.0));
  }

  {
    // Row permutation equivariance of the hypergraph block.
    const std::size_t rows = 9, d = 4, hi = 3;
    const Tensor h = random_tensor({rows, d}, rng);
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Tape tape;
    HyperVars p{tape.constant(random_tensor({d, hi}, rng, 0.5)), tape.constant(random_tensor({hi, hi}, rng))};
    Var base = dhsl_block(tape.constant(h), p, 2);
    Var permuted = dhsl_block(gather_rows(tape.constant(h), perm), p, 2);
    const Tensor expect = gather_rows(base, perm).value();
    const double scale_ref = std::max(1.0, expect.mat().cwiseAbs().maxCoeff());
    out.push_back(check("structure", "hypergraph block row-permutation equivariance (relative)",
                        max_abs_diff(permuted.value(), expect) / scale_ref, 1e-12));
  }
  return out;
}

OracleResult permutation_oracle(std::uint64_t seed) {
  const TinyProblem p = make_tiny_problem(seed, tiny_config(), 0.0);
  const std::size_t n = p.config.n_nodes;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  ModelParameters q = p.params;
  Tensor window = p.window;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p.config.hidden; ++c) q.encoder.spatial_emb(perm[i], c) = p.params.encoder.spatial_emb(i, c);
    for (std::size_t t = 0; t < p.config.lookback; ++t)
      for (std::size_t f = 0; f < p.config.n_features; ++f) window(t, perm[i], f) = p.window(t, i, f);
  }
  const Tensor base = DyHSLModel(p.config, p.network).predict(p.params, p.window);
  const Tensor moved = DyHSLModel(p.config, p.network.permuted(perm)).predict(q, window);
  double worst = 0.0;
  for (std::size_t k = 0; k < p.config.horizon; ++k)
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(moved(k, perm[i]) - base(k, i)));
  return check("permutation", "full forward node-permutation equivariance", worst, 1e-9);
}

OracleResult pooling_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bump(0.0, 2.0);
  double violations = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3, steps = 12, window = 1 + static_cast<std::size_t>(trial % 4);
    const std::size_t w = steps % window == 0 ? window : 1;
    const Tensor h = random_tensor({n * steps, 2}, rng);
    Tensor raised = h;
    std::uniform_int_distribution<std::size_t> pick(0, h.size() - 1);
    raised[pick(rng)] += bump(rng);
    Tape tape;
    const Tensor a = temporal_pool(tape.constant(h), n, w).value();
    const Tensor b = temporal_pool(tape.constant(raised), n, w).value();
    for (std::size_t e = 0; e < a.size(); ++e) violations += b[e] < a[e] ? 1.0 : 0.0;
  }
  return check("pooling", "temporal max pooling is monotone (violations)", violations, 0.0);
}

OracleResult optimizer_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelConfig c = tiny_config();
  ModelParameters params = init_parameters(c, rng());
  ModelParameters grads = map_params<Tensor>(params, [&](const std::string&, const Tensor& t) {
    return random_tensor(t.shape(), rng);
  });
  const AdamOptions opt{0.01, 0.9, 0.999, 1e-8};
  ModelParameters stepped = params;
  Adam adam(params, opt);
  adam.step(stepped, grads);
  // First step: m_hat = g and v_hat = g^2, so theta -= lr * g / (|g| + eps).
  double worst = 0.0;
  std::vector<const Tensor*> g0, p0;
  for_each_param(grads, [&](const std::string&, const Tensor& t) { g0.push_back(&t); });
  for_each_param(params, [&](const std::string&, const Tensor& t) { p0.push_back(&t); });
  std::size_t k = 0;
  for_each_param(stepped, [&](const std::string&, const Tensor& t) {
    for (std::size_t e = 0; e < t.size(); ++e) {
      const double g = (*g0[k])[e];
      const double expect = (*p0[k])[e] - opt.learning_rate * g / (std::abs(g) + opt.epsilon);
      worst = std::max(worst, std::abs(t[e] - expect));
    }
    ++k;
  });
  return check("optimizer", "single Adam step vs closed form", worst, 1e-12);
}

OracleResult low_rank_oracle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // d < I: Lambda = H W is rows x I but its rank cannot exceed d.
  const std::size_t rows = 40, d = 3, hi = 6;
  Tape tape;
  HyperVars p{tape.constant(random_tensor({d, hi}, rng)), tape.constant(random_tensor({hi, hi}, rng))};
  const Tensor lambda = learn_incidence(tape.constant(random_tensor({rows, d}, rng)), p).value();
  Eigen::JacobiSVD<RowMatrix> svd(lambda.mat());
  const auto& s = svd.singularValues();
  return check("low-rank", "incidence singular value beyond min(d, I) relative to largest",
               s(static_cast<Eigen::Index>(d)) / s(0), 1e-9);
}

}  // namespace

std::vector<OracleResult> run_verification(const VerifyOptions& options) {
  std::vector<OracleResult> out;
  {
    const TinyProblem p = make_tiny_problem(options.seed);
    const auto groups = gradient_oracle(p, options.corrupt_w2_gradient ? "igc.w2" : "");
    double worst = 0.0;
    std::string where;
    for (const GroupCheck& g : groups) {
      if (g.result.max_relative_error >= worst) {
        worst = g.result.max_relative_error;
        where = g.name;
      }
    }
    out.push_back(check("gradient", "finite differences, worst group " + where, worst, 1e-4));
  }
  out.push_back(factorization_oracle(options.seed + 1));
  out.push_back(straight_line_oracle(options.seed + 2));
  for (OracleResult& r : structure_oracles(options.seed + 3)) out.push_back(std::move(r));
  out.push_back(permutation_oracle(options.seed + 4));
  out.push_back(pooling_oracle(options.seed + 5));
  out.push_back(optimizer_oracle(options.seed + 6));
  out.push_back(low_rank_oracle(options.seed + 7));
  return out;
}

}  // namespace dyhsl::verify
