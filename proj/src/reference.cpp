#include "dyhsl/reference.hpp"

#include <algorithm>
#include <cmath>

namespace dyhsl::reference {
namespace {

Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

Mat mul(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b.empty() ? 0 : b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mat transposed(const Mat& a) {
  Mat out = zeros(a.empty() ? 0 : a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

Mat relu(Mat a) {
  for (auto& row : a)
    for (double& v : row) v = relu(v);
  return a;
}

Mat plus(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

}  // namespace

Mat to_mat(const Tensor& t) {
  Mat m = zeros(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

Tensor to_tensor(const Mat& m) {
  Tensor t = Tensor::zeros(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

Mat temporal_adjacency(const RoadNetwork& net, std::size_t steps, bool normalize) {
  const std::size_t n = net.n_nodes();
  Mat spatial = zeros(n, n);
  for (const Edge& e : net.edges()) spatial[e.src][e.dst] = e.weight;
  Mat a = zeros(n * steps, n * steps);
  // Node v_i^t sits at row t * n + i.
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t2 = 0; t2 < steps; ++t2)
        for (std::size_t j = 0; j < n; ++j) {
          double v = 0.0;
          if (i == j && (t2 == t || t2 == t + 1)) {
            v = 1.0;
          } else if (t2 == t) {
            v = spatial[i][j];
          }
          a[t * n + i][t2 * n + j] = v;
        }
  if (normalize) {
    for (auto& row : a) {
      double s = 0.0;
      for (double v : row) s += v;
      for (double& v : row) v /= s;
    }
  }
  return a;
}

Mat interaction_pairs(const Mat& adjacency, const Mat& h, const Mat& w1, const Mat& w2) {
  const Mat p1 = mul(h, w1);
  const Mat p2 = mul(h, w2);
  const std::size_t rows = adjacency.size(), d = p1[0].size();
  Mat out = zeros(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      if (adjacency[i][j] == 0.0) continue;
      for (std::size_t j2 = 0; j2 < rows; ++j2) {
        if (adjacency[i][j2] == 0.0) continue;
        const double w = adjacency[i][j] * adjacency[i][j2];
        for (std::size_t c = 0; c < d; ++c) out[i][c] += w * p1[j][c] * p2[j2][c];
      }
    }
  }
  return out;
}

Tensor forward(const ModelConfig& cfg, const RoadNetwork& net, const ModelParameters& p, const Tensor& x) {
  const std::size_t n = cfg.n_nodes, steps = cfg.lookback, d = cfg.hidden;

  // Initial features: projection plus spatial and temporal embeddings.
  Mat h = zeros(n * steps, d);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        double v = p.encoder.spatial_emb(i, c) + p.encoder.temporal_emb(t, c);
        for (std::size_t f = 0; f < cfg.n_features; ++f) v += x(t, i, f) * p.encoder.input_proj(f, c);
        h[t * n + i][c] = v;
      }

  // Prior graph convolution.
  const Mat a_full = temporal_adjacency(net, steps, true);
  for (const Tensor& w : p.encoder.layers) h = relu(mul(mul(a_full, h), to_mat(w)));

  std::vector<Mat> gammas;
  for (std::size_t s = 0; s < cfg.windows.size(); ++s) {
    const std::size_t eps = cfg.windows[s], pooled = steps / eps;
    Mat delta = zeros(n * pooled, d);
    for (std::size_t k = 0; k < pooled; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) {
          double m = h[(k * eps) * n + i][c];
          for (std::size_t u = 1; u < eps; ++u) m = std::max(m, h[(k * eps + u) * n + i][c]);
          delta[k * n + i][c] = m;
        }
    const Mat a = temporal_adjacency(net, pooled, true);
    const ScaleParams& sp = p.scales[s];
    for (std::size_t l = 0; l < cfg.mhce_layers; ++l) {
      // Hypergraph branch.
      Mat hyper = delta;
      for (std::size_t r = 0; r < cfg.hyper_layers; ++r) {
        const Mat lambda = mul(hyper, to_mat(sp.hyper.incidence_factor));
        const Mat lt_h = mul(transposed(lambda), hyper);
        const Mat e = plus(relu(mul(to_mat(sp.hyper.hyperedge_relations), lt_h)), lt_h);
        hyper = mul(lambda, e);
      }
      // Interactive branch.
      const Mat agg = mul(a, delta);
      const Mat left = mul(agg, to_mat(sp.igc.w1));
      const Mat right = mul(agg, to_mat(sp.igc.w2));
      const Mat lin = mul(agg, to_mat(sp.igc.w3));
      Mat next = zeros(n * pooled, d);
      for (std::size_t row = 0; row < n * pooled; ++row)
        for (std::size_t c = 0; c < d; ++c) {
          const double interactive = relu(left[row][c] * right[row][c]) + relu(lin[row][c]);
          next[row][c] = 0.5 * (hyper[row][c] + interactive);
        }
      delta = std::move(next);
    }
    Mat gamma = zeros(n, d);
    for (std::size_t k = 0; k < pooled; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) gamma[i][c] += delta[k * n + i][c] / static_cast<double>(pooled);
    gammas.push_back(std::move(gamma));
  }

  double zsum = 0.0;
  std::vector<double> weights(gammas.size());
  for (std::size_t s = 0; s < gammas.size(); ++s) zsum += weights[s] = std::exp(p.fusion.logits[s]);
  Tensor y = Tensor::zeros(cfg.horizon, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> feat(2 * d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t s = 0; s < gammas.size(); ++s) feat[c] += weights[s] / zsum * gammas[s][i][c];
      feat[d + c] = h[(steps - 1) * n + i][c];
    }
    for (std::size_t k = 0; k < cfg.horizon; ++k) {
      double v = p.readout.bias(0, k);
      for (std::size_t c = 0; c < 2 * d; ++c) v += feat[c] * p.readout.weight(c, k);
      y(k, i) = v;
    }
  }
  return y;
}

}  // namespace dyhsl::reference
