#include "dyhsl/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"

#include "dyhsl/error.hpp"

namespace dyhsl {

SignalTensor::SignalTensor(SignalMeta meta, Tensor values) : meta_(meta), values_(std::move(values)) {
  const Shape expected{meta_.n_timesteps, meta_.n_nodes, meta_.n_features};
  if (values_.shape() != expected) {
    throw FormatError("signal values " + shape_string(values_.shape()) + " do not match metadata " +
                      shape_string(expected));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      const std::size_t f = k % meta_.n_features;
      const std::size_t n = (k / meta_.n_features) % meta_.n_nodes;
      const std::size_t t = k / (meta_.n_features * meta_.n_nodes);
      throw DataError("non-finite signal value at t=" + std::to_string(t) + ", node=" + std::to_string(n) +
                      ", feature=" + std::to_string(f));
    }
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& signals_path) {
  std::filesystem::path p = signals_path;
  p.replace_extension(".json");
  return p;
}

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

SignalTensor read_signals(const std::filesystem::path& signals_path) {
  const std::filesystem::path meta_path = sidecar_path(signals_path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw FormatError("cannot open signal sidecar " + meta_path.string());
  SignalMeta meta;
  try {
    const nlohmann::json j = nlohmann::json::parse(meta_in);
    meta.n_timesteps = j.at("T").get<std::size_t>();
    meta.n_nodes = j.at("N").get<std::size_t>();
    meta.n_features = j.at("F").get<std::size_t>();
    meta.interval_minutes = j.value("interval_minutes", 5.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  if (meta.n_timesteps == 0 || meta.n_nodes == 0 || meta.n_features == 0) {
    throw FormatError(meta_path.string() + ": T, N and F must all be positive");
  }

  std::ifstream in(signals_path, std::ios::binary);
  if (!in) throw FormatError("cannot open signal file " + signals_path.string());
  const std::size_t count = meta.n_timesteps * meta.n_nodes * meta.n_features;
  const auto bytes = std::filesystem::file_size(signals_path);
  if (bytes != count * sizeof(float)) {
    throw FormatError(signals_path.string() + ": holds " + std::to_string(bytes) + " bytes, sidecar T=" +
                      std::to_string(meta.n_timesteps) + " N=" + std::to_string(meta.n_nodes) +
                      " F=" + std::to_string(meta.n_features) + " needs " + std::to_string(count * sizeof(float)));
  }
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw FormatError(signals_path.string() + ": short read");
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) values[k] = std::bit_cast<float>(to_little_endian(raw[k]));
  return SignalTensor(meta, Tensor({meta.n_timesteps, meta.n_nodes, meta.n_features}, std::move(values)));
}

void write_signals(const std::filesystem::path& signals_path, const SignalTensor& signals) {
  const SignalMeta& m = signals.meta();
  std::ofstream out(signals_path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + signals_path.string());
  for (double v : signals.values().values()) {
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  std::ofstream meta_out(sidecar_path(signals_path));
  if (!meta_out) throw FormatError("cannot write " + sidecar_path(signals_path).string());
  meta_out << nlohmann::json{{"T", m.n_timesteps}, {"N", m.n_nodes}, {"F", m.n_features},
                             {"interval_minutes", m.interval_minutes}}
                  .dump()
           << '\n';
}

std::pair<SignalTensor, RoadNetwork> ingest(const std::filesystem::path& signals_path,
                                            const std::filesystem::path& edges_path) {
  SignalTensor signals = read_signals(signals_path);
  RoadNetwork net = read_road_network_csv(edges_path, signals.meta().n_nodes);
  if (net.n_nodes() != signals.meta().n_nodes) {
    throw FormatError("signals have N=" + std::to_string(signals.meta().n_nodes) + " but the road network has N=" +
                      std::to_string(net.n_nodes()));
  }
  return {std::move(signals), std::move(net)};
}

NormStats compute_norm_stats(const SignalTensor& x, std::size_t row_begin, std::size_t row_end) {
  const SignalMeta& m = x.meta();
  if (row_begin >= row_end || row_end > m.n_timesteps) {
    throw ContractError("compute_norm_stats: invalid row range [" + std::to_string(row_begin) + ", " +
                        std::to_string(row_end) + ")");
  }
  NormStats s{std::vector<double>(m.n_features, 0.0), std::vector<double>(m.n_features, 0.0)};
  const double count = static_cast<double>((row_end - row_begin) * m.n_nodes);
  for (std::size_t t = row_begin; t < row_end; ++t)
    for (std::size_t i = 0; i < m.n_nodes; ++i)
      for (std::size_t f = 0; f < m.n_features; ++f) s.mean[f] += x(t, i, f);
  for (double& v : s.mean) v /= count;
  for (std::size_t t = row_begin; t < row_end; ++t)
    for (std::size_t i = 0; i < m.n_nodes; ++i)
      for (std::size_t f = 0; f < m.n_features; ++f) {
        const double dv = x(t, i, f) - s.mean[f];
        s.std[f] += dv * dv;
      }
  for (std::size_t f = 0; f < m.n_features; ++f) {
    s.std[f] = std::sqrt(s.std[f] / count);
    if (!(s.std[f] > 0.0)) throw DataError("feature " + std::to_string(f) + " is constant; cannot z-score");
  }
  return s;
}

namespace {

SignalTensor transform(const SignalTensor& x, const NormStats& stats, bool forward) {
  const SignalMeta& m = x.meta();
  if (stats.mean.size() != m.n_features || stats.std.size() != m.n_features) {
    throw DimensionError("normalization statistics cover " + std::to_string(stats.mean.size()) +
                         " features, signal has " + std::to_string(m.n_features));
  }
  for (std::size_t f = 0; f < m.n_features; ++f) {
    if (!(stats.std[f] > 0.0)) throw DataError("zero standard deviation for feature " + std::to_string(f));
  }
  Tensor v = x.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::size_t f = k % m.n_features;
    v[k] = forward ? (v[k] - stats.mean[f]) / stats.std[f] : v[k] * stats.std[f] + stats.mean[f];
  }
  return SignalTensor(m, std::move(v));
}

}  // namespace

SignalTensor zscore(const SignalTensor& x, const NormStats& stats) { return transform(x, stats, true); }

Tensor NormStats::normalize_window(const Tensor& window) const {
  if (window.rank() != 3 || window.shape()[2] != mean.size()) {
    throw DimensionError("normalize_window: window " + shape_string(window.shape()) + " vs " +
                         std::to_string(mean.size()) + " normalized features");
  }
  Tensor out = window;
  const std::size_t nf = mean.size();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (out[k] - mean[k % nf]) / std[k % nf];
  return out;
}

SignalTensor inverse_zscore(const SignalTensor& x, const NormStats& stats) { return transform(x, stats, false); }

ForecastSample::ForecastSample(std::shared_ptr<const SignalTensor> source, std::size_t start, std::size_t lookback,
                               std::size_t horizon)
    : source_(std::move(source)), start_(start), lookback_(lookback), horizon_(horizon) {
  if (!source_) throw ContractError("forecast sample without a source");
  if (lookback_ == 0 || horizon_ == 0) throw ContractError("forecast sample needs positive lookback and horizon");
  if (end() >= source_->meta().n_timesteps) throw ContractError("forecast sample runs past the end of the series");
}

Tensor ForecastSample::input() const {
  const SignalMeta& m = source_->meta();
  const std::size_t stride = m.n_nodes * m.n_features;
  const auto first = source_->values().values().begin() + static_cast<std::ptrdiff_t>(start_ * stride);
  return Tensor({lookback_, m.n_nodes, m.n_features},
                std::vector<double>(first, first + static_cast<std::ptrdiff_t>(lookback_ * stride)));
}

Tensor ForecastSample::target() const {
  const SignalMeta& m = source_->meta();
  Tensor y = Tensor::zeros(horizon_, m.n_nodes);
  for (std::size_t k = 0; k < horizon_; ++k)
    for (std::size_t i = 0; i < m.n_nodes; ++i) y(k, i) = (*source_)(start_ + lookback_ + k, i, 0);
  return y;
}

std::vector<ForecastSample> make_windows(std::shared_ptr<const SignalTensor> x, std::size_t lookback,
                                         std::size_t horizon) {
  if (!x) throw ContractError("make_windows: null signal tensor");
  const std::size_t total = x->meta().n_timesteps;
  if (lookback == 0 || horizon == 0) throw ContractError("make_windows: lookback and horizon must be positive");
  if (total < lookback + horizon) {
    throw DataError("make_windows: series of " + std::to_string(total) + " steps is shorter than lookback " +
                    std::to_string(lookback) + " + horizon " + std::to_string(horizon));
  }
  std::vector<ForecastSample> out;
  out.reserve(total - lookback - horizon + 1);
  for (std::size_t s = 0; s + lookback + horizon <= total; ++s) out.emplace_back(x, s, lookback, horizon);
  return out;
}

SynthData synth_generate(const SynthConfig& c) {
  if (c.n_nodes == 0 || c.n_communities == 0 || c.n_communities > c.n_nodes) {
    throw ContractError("synth_generate: need 1 <= communities <= nodes, got " + std::to_string(c.n_communities) +
                        " communities for " + std::to_string(c.n_nodes) + " nodes");
  }
  if (c.t_total == 0 || c.period == 0) throw ContractError("synth_generate: t_total and period must be positive");
  if (c.noise < 0.0 || c.event_rate < 0.0 || c.event_rate > 1.0) {
    throw ContractError("synth_generate: noise must be >= 0 and event_rate in [0, 1]");
  }
  std::mt19937_64 rng(c.seed);

  // Balanced contiguous communities.
  std::vector<std::vector<std::size_t>> members(c.n_communities);
  std::vector<std::size_t> membership(c.n_nodes);
  for (std::size_t i = 0; i < c.n_nodes; ++i) {
    membership[i] = i * c.n_communities / c.n_nodes;
    members[membership[i]].push_back(i);
  }

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  auto link = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    pairs.emplace(a, b);
    pairs.emplace(b, a);
  };
  for (const auto& ring : members) {
    for (std::size_t k = 0; k + 1 < ring.size(); ++k) link(ring[k], ring[k + 1]);
    if (ring.size() > 2) link(ring.back(), ring.front());
  }
  if (c.n_communities > 1) {
    for (std::size_t a = 0; a < c.n_communities; ++a) {
      const std::size_t b = (a + 1) % c.n_communities;
      if (b < a && c.n_communities == 2) break;
      for (std::size_t k = 0; k < c.bridges; ++k) {
        std::uniform_int_distribution<std::size_t> pa(0, members[a].size() - 1), pb(0, members[b].size() - 1);
        link(members[a][pa(rng)], members[b][pb(rng)]);
      }
    }
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) edges.push_back({a, b, 1.0});

  Tensor values({c.t_total, c.n_nodes, 1});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < c.t_total; ++t) {
    for (std::size_t i = 0; i < c.n_nodes; ++i) {
      const double phase = two_pi * static_cast<double>(membership[i]) / static_cast<double>(c.n_communities);
      values(t, i, 0) = c.base_level +
                        c.amplitude * std::sin(two_pi * static_cast<double>(t) / static_cast<double>(c.period) + phase);
    }
  }

  if (c.event_rate > 0.0) {
    std::bernoulli_distribution fires(c.event_rate);
    std::uniform_real_distribution<double> magnitude(0.5 * c.event_magnitude, c.event_magnitude);
    for (std::size_t com = 0; com < c.n_communities; ++com) {
      const auto& ring = members[com];
      const std::size_t size = ring.size();
      std::uniform_int_distribution<std::size_t> pick(0, size - 1);
      for (std::size_t t0 = 0; t0 < c.t_total; ++t0) {
        if (!fires(rng)) continue;
        const std::size_t origin = pick(rng);
        const double mag = magnitude(rng);
        for (std::size_t m = 0; m < size; ++m) {
          const std::size_t gap = m > origin ? m - origin : origin - m;
          const std::size_t hops = std::min(gap, size - gap);
          for (std::size_t k = 0; k < c.event_length; ++k) {
            const std::size_t t = t0 + hops + k;
            if (t >= c.t_total) break;
            values(t, ring[m], 0) += mag * std::exp(-static_cast<double>(k) / c.event_decay);
          }
        }
      }
    }
  }

  if (c.noise > 0.0) {
    std::normal_distribution<double> noise(0.0, c.noise);
    for (double& v : values.values()) v += noise(rng);
  }
  for (double& v : values.values()) v = std::max(v, 0.0);

  SignalMeta meta{c.t_total, c.n_nodes, 1, 5.0};
  return SynthData{SignalTensor(meta, std::move(values)), RoadNetwork(c.n_nodes, std::move(edges)),
                   std::move(membership)};
}

}  // namespace dyhsl
