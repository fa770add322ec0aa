#include "dyhsl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dyhsl/error.hpp"

namespace dyhsl {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()) + " disagree");
  }
  Tensor out = Tensor::zeros(av.rows(), bv.cols());
  out.mat().noalias() = av.mat() * bv.mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor ga = Tensor::zeros(av.rows(), av.cols());
      ga.mat().noalias() = g.mat() * bv.mat().transpose();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb = Tensor::zeros(bv.rows(), bv.cols());
      gb.mat().noalias() = av.mat().transpose() * g.mat();
      t.accumulate(ib, gb);
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix("transpose", av);
  Tensor out = Tensor::zeros(av.cols(), av.rows());
  out.mat() = av.mat().transpose();
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    Tensor ga = Tensor::zeros(g.cols(), g.rows());
    ga.mat() = g.mat().transpose();
    t.accumulate(ia, ga);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {a}, [ia, factor](Tape& t, const Tensor& g) {
    Tensor ga = g;
    for (double& v : ga.values()) v *= factor;
    t.accumulate(ia, ga);
  });
}

Var hadamard(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape("hadamard", av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("hadamard", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * bv[i];
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * av[i];
      t.accumulate(ib, gb);
    }
  });
}

Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] > 0.0 ? av[i] : 0.0;
    margin = std::min(margin, std::abs(av[i]));
    a.tape().note_branch(av[i] > 0.0);
  }
  a.tape().note_kink_margin(margin);
  const std::size_t ia = a.id();
  return a.tape().record("relu", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    Tensor ga(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = av[i] > 0.0 ? g[i] : 0.0;
    t.accumulate(ia, ga);
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> adjacency, Var h) {
  if (!adjacency) throw ContractError("spmm: null adjacency");
  const Tensor& hv = h.value();
  require_matrix("spmm", hv);
  if (static_cast<std::size_t>(adjacency->cols()) != hv.rows()) {
    throw DimensionError("spmm: adjacency " + std::to_string(adjacency->rows()) + "x" +
                         std::to_string(adjacency->cols()) + " cannot multiply " + shape_string(hv.shape()));
  }
  Tensor out = Tensor::zeros(static_cast<std::size_t>(adjacency->rows()), hv.cols());
  out.mat().noalias() = (*adjacency) * hv.mat();
  const std::size_t ih = h.id();
  return h.tape().record("spmm", std::move(out), {h}, [ih, adjacency](Tape& t, const Tensor& g) {
    const Tensor& hv = t.value(ih);
    Tensor gh = Tensor::zeros(hv.rows(), hv.cols());
    gh.mat().noalias() = adjacency->transpose() * g.mat();
    t.accumulate(ih, gh);
  });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Tensor& av = a.value();
  require_matrix("gather_rows", av);
  const std::size_t cols = av.cols();
  Tensor out = Tensor::zeros(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= av.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                           shape_string(av.shape()));
    }
    std::copy_n(av.data() + indices[r] * cols, cols, out.data() + r * cols);
  }
  const std::size_t ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {a},
                         [ia, idx = std::move(indices)](Tape& t, const Tensor& g) {
                           const Tensor& av = t.value(ia);
                           const std::size_t cols = av.cols();
                           Tensor ga(av.shape());
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             double* dst = ga.data() + idx[r] * cols;
                             const double* src = g.data() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                           }
                           t.accumulate(ia, ga);
                         });
}

Var add_row_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_matrix("add_row_bias", av);
  if (bv.rank() != 2 || bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_row_bias: bias " + shape_string(bv.shape()) + " does not fit " +
                         shape_string(av.shape()));
  }
  Tensor out = av;
  out.mat().rowwise() += bv.mat().row(0);
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().record("add_row_bias", std::move(out), {a, bias}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) {
      Tensor gb = Tensor::zeros(1, g.cols());
      gb.mat() = g.mat().colwise().sum();
      t.accumulate(ib, gb);
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("concat_cols", av);
  require_matrix("concat_cols", bv);
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: row counts of " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()) + " differ");
  }
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::zeros(av.rows(), ca + cb);
  out.mat().leftCols(static_cast<Eigen::Index>(ca)) = av.mat();
  out.mat().rightCols(static_cast<Eigen::Index>(cb)) = bv.mat();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor ga = Tensor::zeros(g.rows(), ca);
      ga.mat() = g.mat().leftCols(static_cast<Eigen::Index>(ca));
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb = Tensor::zeros(g.rows(), cb);
      gb.mat() = g.mat().rightCols(static_cast<Eigen::Index>(cb));
      t.accumulate(ib, gb);
    }
  });
}

Var temporal_max_pool(Var h, std::size_t n_nodes, std::size_t window) {
  const Tensor& hv = h.value();
  require_matrix("temporal_max_pool", hv);
  if (n_nodes == 0 || hv.rows() % n_nodes != 0) {
    throw DimensionError("temporal_max_pool: " + std::to_string(hv.rows()) + " rows are not a multiple of " +
                         std::to_string(n_nodes) + " nodes");
  }
  const std::size_t steps = hv.rows() / n_nodes;
  if (window == 0 || steps % window != 0) {
    throw ConfigError("temporal_max_pool: window " + std::to_string(window) + " does not divide " +
                      std::to_string(steps) + " steps");
  }
  const std::size_t cols = hv.cols();
  const std::size_t out_steps = steps / window;
  Tensor out = Tensor::zeros(out_steps * n_nodes, cols);
  // Source row of the winning entry, per output entry.
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t k = 0; k < out_steps; ++k) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const std::size_t orow = k * n_nodes + i;
      for (std::size_t c = 0; c < cols; ++c) {
        std::size_t best = k * window * n_nodes + i;
        for (std::size_t s = 1; s < window; ++s) {
          const std::size_t src = (k * window + s) * n_nodes + i;
          if (hv(src, c) > hv(best, c)) best = src;
        }
        out(orow, c) = hv(best, c);
        argmax[orow * cols + c] = best;
        h.tape().note_branch(best);
      }
    }
  }
  const std::size_t ih = h.id();
  return h.tape().record("temporal_max_pool", std::move(out), {h},
                         [ih, cols, am = std::move(argmax)](Tape& t, const Tensor& g) {
                           Tensor gh(t.value(ih).shape());
                           for (std::size_t e = 0; e < am.size(); ++e) gh[am[e] * cols + e % cols] += g[e];
                           t.accumulate(ih, gh);
                         });
}

Var time_mean_pool(Var h, std::size_t n_nodes) {
  const Tensor& hv = h.value();
  require_matrix("time_mean_pool", hv);
  if (n_nodes == 0 || hv.rows() % n_nodes != 0) {
    throw DimensionError("time_mean_pool: " + std::to_string(hv.rows()) + " rows are not a multiple of " +
                         std::to_string(n_nodes) + " nodes");
  }
  const std::size_t steps = hv.rows() / n_nodes;
  const std::size_t cols = hv.cols();
  const double inv = 1.0 / static_cast<double>(steps);
  Tensor out = Tensor::zeros(n_nodes, cols);
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      for (std::size_t c = 0; c < cols; ++c) out(i, c) += hv(k * n_nodes + i, c);
    }
  }
  for (double& v : out.values()) v *= inv;
  const std::size_t ih = h.id();
  return h.tape().record("time_mean_pool", std::move(out), {h}, [ih, n_nodes, steps, cols, inv](Tape& t, const Tensor& g) {
    Tensor gh = Tensor::zeros(steps * n_nodes, cols);
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t c = 0; c < cols; ++c) gh(k * n_nodes + i, c) = g(i, c) * inv;
      }
    }
    t.accumulate(ih, gh);
  });
}

Var softmax(Var logits) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2 || lv.rows() != 1 || lv.cols() == 0) {
    throw DimensionError("softmax: expected a non-empty 1 x J row, got " + shape_string(lv.shape()));
  }
  const double mx = *std::max_element(lv.values().begin(), lv.values().end());
  Tensor out(lv.shape());
  double total = 0.0;
  for (std::size_t j = 0; j < lv.size(); ++j) {
    out[j] = std::exp(lv[j] - mx);
    total += out[j];
  }
  for (double& v : out.values()) v /= total;
  const std::size_t il = logits.id();
  Tensor probs = out;
  return logits.tape().record("softmax", std::move(out), {logits}, [il, p = std::move(probs)](Tape& t, const Tensor& g) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += g[j] * p[j];
    Tensor gl(p.shape());
    for (std::size_t j = 0; j < p.size(); ++j) gl[j] = p[j] * (g[j] - dot);
    t.accumulate(il, gl);
  });
}

Var weighted_sum(const std::vector<Var>& terms, Var weights) {
  const Tensor& wv = weights.value();
  if (terms.empty()) throw DimensionError("weighted_sum: no terms");
  if (wv.size() != terms.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(terms.size()) + " terms but weights of shape " +
                         shape_string(wv.shape()));
  }
  const Shape& shape = terms.front().value().shape();
  Tensor out(shape);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const Tensor& tv = terms[j].value();
    require_same_shape("weighted_sum", out, tv);
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += wv[j] * tv[e];
  }
  std::vector<std::size_t> ids;
  std::vector<Var> parents = terms;
  for (const Var& v : terms) ids.push_back(v.id());
  parents.push_back(weights);
  const std::size_t iw = weights.id();
  return weights.tape().record("weighted_sum", std::move(out), parents, [ids, iw](Tape& t, const Tensor& g) {
    const Tensor& wv = t.value(iw);
    Tensor gw(wv.shape());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const Tensor& tv = t.value(ids[j]);
      double dot = 0.0;
      for (std::size_t e = 0; e < g.size(); ++e) dot += g[e] * tv[e];
      gw[j] = dot;
      if (t.requires_grad(ids[j])) {
        Tensor gt = g;
        for (double& v : gt.values()) v *= wv[j];
        t.accumulate(ids[j], gt);
      }
    }
    t.accumulate(iw, gw);
  });
}

Var mean_abs_error(Var pred, Var target) {
  const Tensor& pv = pred.value();
  const Tensor& tv = target.value();
  require_same_shape("mean_abs_error", pv, tv);
  if (pv.empty()) throw DimensionError("mean_abs_error: empty operands");
  double total = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double r = pv[i] - tv[i];
    total += std::abs(r);
    margin = std::min(margin, std::abs(r));
    pred.tape().note_branch(r > 0.0);
  }
  pred.tape().note_kink_margin(margin);
  const double n = static_cast<double>(pv.size());
  const std::size_t ip = pred.id(), it = target.id();
  return pred.tape().record("mean_abs_error", Tensor(Shape{1, 1}, {total / n}), {pred, target},
                            [ip, it, n](Tape& t, const Tensor& g) {
                              const Tensor& pv = t.value(ip);
                              const Tensor& tv = t.value(it);
                              Tensor gp(pv.shape());
                              for (std::size_t i = 0; i < pv.size(); ++i) {
                                const double r = pv[i] - tv[i];
                                gp[i] = r > 0.0 ? g[0] / n : (r < 0.0 ? -g[0] / n : 0.0);
                              }
                              if (t.requires_grad(ip)) t.accumulate(ip, gp);
                              if (t.requires_grad(it)) {
                                for (double& v : gp.values()) v = -v;
                                t.accumulate(it, gp);
                              }
                            });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor(Shape{1, 1}, {total}), {a}, [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, Tensor::filled(t.value(ia).shape(), g[0]));
  });
}

}  // namespace dyhsl
