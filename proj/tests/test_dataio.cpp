#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include "dyhsl/dataio.hpp"
#include "dyhsl/error.hpp"

using namespace dyhsl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dyhsl_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SignalTensor ramp(std::size_t steps, std::size_t nodes, std::size_t features) {
  Tensor v({steps, nodes, features});
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < nodes; ++i)
      for (std::size_t f = 0; f < features; ++f) v(t, i, f) = 0.25 * static_cast<double>(t) + 10.0 * i + 100.0 * f;
  return SignalTensor({steps, nodes, features, 5.0}, std::move(v));
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Signals, RoundTrip) {
  const fs::path dir = temp_dir("roundtrip");
  const SignalTensor x = ramp(7, 3, 2);
  write_signals(dir / "x.bin", x);
  EXPECT_TRUE(fs::exists(dir / "x.json"));
  EXPECT_EQ(fs::file_size(dir / "x.bin"), 7u * 3 * 2 * 4);
  const SignalTensor y = read_signals(dir / "x.bin");
  EXPECT_EQ(y.meta(), x.meta());
  // Values are stored as float32; the ramp is exactly representable.
  EXPECT_EQ(y.values(), x.values());
}

TEST(Signals, SingleNodeSingleStep) {
  const fs::path dir = temp_dir("single");
  const SignalTensor x({1, 1, 1, 5.0}, Tensor::filled({1, 1, 1}, 42.0));
  write_signals(dir / "one.bin", x);
  EXPECT_EQ(read_signals(dir / "one.bin")(0, 0, 0), 42.0);
}

TEST(Signals, RejectsBadFiles) {
  const fs::path dir = temp_dir("bad");
  write_signals(dir / "x.bin", ramp(4, 2, 1));
  fs::resize_file(dir / "x.bin", 4 * 2 * 4 - 4);
  EXPECT_THROW(read_signals(dir / "x.bin"), FormatError);
  EXPECT_THROW(read_signals(dir / "missing.bin"), FormatError);
  std::ofstream(dir / "y.json") << "{\"T\": 0, \"N\": 2, \"F\": 1}";
  std::ofstream(dir / "y.bin");
  EXPECT_THROW(read_signals(dir / "y.bin"), FormatError);
}

TEST(Signals, NonFiniteValueIsLocated) {
  Tensor v = Tensor::filled({3, 2, 1}, 1.0);
  v(2, 1, 0) = std::nan("");
  try {
    SignalTensor({3, 2, 1, 5.0}, v);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("t=2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("node=1"), std::string::npos) << msg;
  }
}

TEST(Ingest, EdgesBeyondTheSignalNodesAreRejected) {
  const fs::path dir = temp_dir("ingest");
  write_signals(dir / "x.bin", ramp(5, 3, 1));
  write_road_network_csv(dir / "edges.csv", RoadNetwork(4, {{0, 1, 1.0}, {3, 2, 1.0}}));
  try {
    ingest(dir / "x.bin", dir / "edges.csv");
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("N=3"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
  }
  write_road_network_csv(dir / "edges.csv", RoadNetwork(3, {{0, 1, 1.0}, {2, 1, 0.5}}));
  const auto [signals, network] = ingest(dir / "x.bin", dir / "edges.csv");
  EXPECT_EQ(signals.meta().n_nodes, 3u);
  EXPECT_EQ(network.n_nodes(), 3u);
  EXPECT_EQ(network.edges().size(), 2u);
}

TEST(Normalization, Examples) {
  Tensor v({4, 1, 1});
  const double raw[] = {1, 3, 1, 3};
  for (std::size_t t = 0; t < 4; ++t) v(t, 0, 0) = raw[t];
  const SignalTensor x({4, 1, 1, 5.0}, v);
  const NormStats s = compute_norm_stats(x, 0, 4);
  EXPECT_EQ(s.mean[0], 2.0);
  EXPECT_EQ(s.std[0], 1.0);
  EXPECT_EQ(s.normalize_flow(4.0), 2.0);
  const SignalTensor z = zscore(x, s);
  EXPECT_EQ(z(1, 0, 0), 1.0);
  EXPECT_EQ(inverse_zscore(z, s).values(), x.values());

  const SignalTensor flat({3, 1, 1, 5.0}, Tensor::filled({3, 1, 1}, 5.0));
  EXPECT_THROW(compute_norm_stats(flat, 0, 3), DataError);
  EXPECT_THROW(compute_norm_stats(x, 2, 2), ContractError);
  EXPECT_THROW(compute_norm_stats(x, 0, 5), ContractError);
}

TEST(Normalization, UsesOnlyTheGivenRows) {
  const SignalTensor x = ramp(20, 2, 1);
  const NormStats a = compute_norm_stats(x, 0, 10);
  Tensor changed = x.values();
  for (std::size_t t = 10; t < 20; ++t) changed(t, 0, 0) = 1e6;
  const NormStats b = compute_norm_stats(SignalTensor(x.meta(), changed), 0, 10);
  EXPECT_EQ(a, b);
}

TEST(Windows, CountsAndContents) {
  auto x = std::make_shared<const SignalTensor>(ramp(24, 2, 1));
  EXPECT_EQ(make_windows(x, 12, 12).size(), 1u);
  auto y = std::make_shared<const SignalTensor>(ramp(26, 2, 1));
  const auto w = make_windows(y, 12, 12);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[2].start(), 2u);
  EXPECT_EQ(w[2].end(), 25u);
  EXPECT_EQ(w[2].input()(0, 1, 0), (*y)(2, 1, 0));
  EXPECT_EQ(w[2].target()(11, 1), (*y)(25, 1, 0));
  EXPECT_THROW(make_windows(x, 12, 13), DataError);
  EXPECT_THROW(make_windows(x, 0, 1), ContractError);
}

TEST(Windows, TargetsNeverFeedTheirInputs) {
  auto x = std::make_shared<const SignalTensor>(ramp(40, 1, 1));
  for (const ForecastSample& s : make_windows(x, 5, 3)) {
    const Tensor in = s.input(), out = s.target();
    // The ramp increases with t, so every target exceeds every input.
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t t = 0; t < 5; ++t) ASSERT_GT(out(k, 0), in(t, 0, 0));
  }
}

TEST(Synth, Deterministic) {
  SynthConfig c;
  c.n_nodes = 9;
  c.t_total = 300;
  c.seed = 3;
  const SynthData a = synth_generate(c), b = synth_generate(c);
  EXPECT_EQ(a.signals.values(), b.signals.values());
  EXPECT_EQ(a.network.edges().size(), b.network.edges().size());
  EXPECT_EQ(a.membership, b.membership);
  c.seed = 4;
  EXPECT_NE(synth_generate(c).signals.values(), a.signals.values());
}

TEST(Synth, NoiseFreeIsThePhasedSinusoid) {
  SynthConfig c;
  c.n_nodes = 6;
  c.n_communities = 3;
  c.t_total = 100;
  c.noise = 0.0;
  c.event_rate = 0.0;
  const SynthData d = synth_generate(c);
  const double pi = std::acos(-1.0);
  for (std::size_t t = 0; t < 100; ++t)
    for (std::size_t i = 0; i < 6; ++i) {
      const double phase = 2 * pi * static_cast<double>(i / 2) / 3.0;
      EXPECT_NEAR(d.signals(t, i, 0), 200.0 + 100.0 * std::sin(2 * pi * t / 288.0 + phase), 1e-9);
    }
  EXPECT_EQ(d.membership, (std::vector<std::size_t>{0, 0, 1, 1, 2, 2}));
}

TEST(Synth, CommunitiesCorrelateMoreInside) {
  SynthConfig c;
  c.seed = 5;
  c.t_total = 2016;
  const SynthData d = synth_generate(c);
  auto series = [&](std::size_t i) {
    std::vector<double> s(c.t_total);
    for (std::size_t t = 0; t < c.t_total; ++t) s[t] = d.signals(t, i, 0);
    return s;
  };
  double inside = 0, across = 0;
  std::size_t n_in = 0, n_across = 0;
  for (std::size_t i = 0; i < c.n_nodes; ++i)
    for (std::size_t j = i + 1; j < c.n_nodes; ++j) {
      const double r = correlation(series(i), series(j));
      if (d.membership[i] == d.membership[j]) {
        inside += r;
        ++n_in;
      } else {
        across += r;
        ++n_across;
      }
    }
  EXPECT_GT(inside / n_in, across / n_across + 0.5);
  EXPECT_EQ(d.network.n_nodes(), c.n_nodes);
}
