#include <gtest/gtest.h>

#include <random>

#include "dyhsl/error.hpp"
#include "dyhsl/gradcheck.hpp"
#include "dyhsl/interaction.hpp"
#include "dyhsl/ops.hpp"
#include "dyhsl/reference.hpp"

using namespace dyhsl;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

TemporalGraph graph(const RoadNetwork& net, std::size_t t) { return normalize_adjacency(build_temporal_graph(net, t)); }

RoadNetwork random_network(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(0.5);
  std::uniform_real_distribution<double> w(0.5, 1.5);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && keep(rng)) edges.push_back({i, j, w(rng)});
  return RoadNetwork(n, edges);
}

}  // namespace

TEST(InteractiveAggregate, SingleNeighbour) {
  std::mt19937_64 rng(1);
  const Tensor h = random_tensor({1, 3}, rng), w1 = random_tensor({3, 3}, rng), w2 = random_tensor({3, 3}, rng);
  Tape tape;
  const IGCVars p{tape.constant(w1), tape.constant(w2), tape.constant(Tensor::zeros(3, 3))};
  const Tensor got = interactive_aggregate(tape.constant(h), graph(RoadNetwork(1, {}), 1), p).value();
  const RowMatrix expect = ((h.mat() * w1.mat()).cwiseProduct(h.mat() * w2.mat())).cwiseMax(0.0);
  EXPECT_LT((got.mat() - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InteractiveAggregate, ZeroStates) {
  std::mt19937_64 rng(2);
  Tape tape;
  const IGCVars p{tape.constant(random_tensor({2, 2}, rng)), tape.constant(random_tensor({2, 2}, rng)),
                  tape.constant(random_tensor({2, 2}, rng))};
  EXPECT_EQ(interactive_aggregate(tape.constant(Tensor::zeros(6, 2)), graph(random_network(3, rng), 2), p).value(),
            Tensor::zeros(6, 2));
}

TEST(IgcBlock, InteractionOffLeavesLinearTerm) {
  std::mt19937_64 rng(3);
  const RoadNetwork net = random_network(4, rng);
  const TemporalGraph g = graph(net, 2);
  const Tensor h = random_tensor({8, 3}, rng), w3 = random_tensor({3, 3}, rng);
  Tape tape;
  const IGCVars p{tape.constant(Tensor::zeros(3, 3)), tape.constant(random_tensor({3, 3}, rng)), tape.constant(w3)};
  const Tensor got = igc_block(tape.constant(h), g, p).value();
  const Tensor linear = relu(matmul(spmm(g.normalized(), tape.constant(h)), tape.constant(w3))).value();
  EXPECT_EQ(got, linear);
}

TEST(IgcBlock, NoLinearTermLeavesInteraction) {
  std::mt19937_64 rng(4);
  const TemporalGraph g = graph(random_network(3, rng), 2);
  const Tensor h = random_tensor({6, 2}, rng);
  Tape tape;
  const IGCVars p{tape.constant(random_tensor({2, 2}, rng)), tape.constant(random_tensor({2, 2}, rng)),
                  tape.constant(Tensor::zeros(2, 2))};
  EXPECT_EQ(igc_block(tape.constant(h), g, p).value(), interactive_aggregate(tape.constant(h), g, p).value());
}

TEST(InteractionProduct, MatchesOrderedPairSum) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 5, t = 1 + rng() % 3, d = 1 + rng() % 4;
    const RoadNetwork net = random_network(n, rng);
    const Tensor h = random_tensor({n * t, d}, rng), w1 = random_tensor({d, d}, rng), w2 = random_tensor({d, d}, rng);
    Tape tape;
    const IGCVars p{tape.constant(w1), tape.constant(w2), tape.constant(Tensor::zeros(d, d))};
    const Tensor fast = interaction_product(tape.constant(h), graph(net, t), p).value();
    const Tensor slow = reference::to_tensor(reference::interaction_pairs(
        reference::temporal_adjacency(net, t, true), reference::to_mat(h), reference::to_mat(w1), reference::to_mat(w2)));
    ASSERT_LT(max_abs_diff(fast, slow), 1e-10) << "trial " << trial;
  }
}

TEST(InteractiveAggregate, NeighbourOrderDoesNotMatter) {
  std::mt19937_64 rng(6);
  const RoadNetwork net = random_network(5, rng);
  std::vector<Edge> shuffled = net.edges();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Tensor h = random_tensor({10, 3}, rng);
  Tape tape;
  const IGCVars p{tape.constant(random_tensor({3, 3}, rng)), tape.constant(random_tensor({3, 3}, rng)),
                  tape.constant(random_tensor({3, 3}, rng))};
  EXPECT_EQ(interactive_aggregate(tape.constant(h), graph(net, 2), p).value(),
            interactive_aggregate(tape.constant(h), graph(RoadNetwork(5, shuffled), 2), p).value());
}

TEST(IgcBlock, RejectsUnnormalizedGraphAndWrongRows) {
  Tape tape;
  const IGCVars p{tape.constant(Tensor::zeros(2, 2)), tape.constant(Tensor::zeros(2, 2)),
                  tape.constant(Tensor::zeros(2, 2))};
  EXPECT_THROW(igc_block(tape.constant(Tensor::zeros(2, 2)), build_temporal_graph(RoadNetwork(2, {}), 1), p),
               ContractError);
  EXPECT_THROW(igc_block(tape.constant(Tensor::zeros(3, 2)), graph(RoadNetwork(2, {}), 1), p), DimensionError);
}

TEST(IgcBlock, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const TemporalGraph g = graph(random_network(4, rng), 2);
  const Tensor h0 = random_tensor({8, 3}, rng), up = random_tensor({8, 3}, rng);
  std::vector<Tensor> w0{random_tensor({3, 3}, rng), random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)};
  auto run = [&](const Tensor& h, const std::vector<Tensor>& w, std::vector<Tensor>* grads) {
    Tape tape;
    Var hv = tape.leaf(h, "h");
    const IGCVars p{tape.leaf(w[0], "w1"), tape.leaf(w[1], "w2"), tape.leaf(w[2], "w3")};
    Var loss = sum(hadamard(igc_block(hv, g, p), tape.constant(up)));
    if (grads) {
      tape.backward(loss);
      *grads = {tape.grad(hv), tape.grad(p.w1), tape.grad(p.w2), tape.grad(p.w3)};
    }
    return std::pair{loss.value()[0], tape.kink_margin()};
  };
  std::vector<Tensor> grads;
  ASSERT_GT(run(h0, w0, &grads).second, 1e-4) << "instance sits on a ReLU kink; pick another seed";
  EXPECT_LT(finite_difference_check([&](const Tensor& x) { return run(x, w0, nullptr).first; }, h0, grads[0], 1e-6)
                .max_relative_error,
            1e-4);
  for (std::size_t k = 0; k < 3; ++k) {
    auto f = [&](const Tensor& x) {
      auto w = w0;
      w[k] = x;
      return run(h0, w, nullptr).first;
    };
    EXPECT_LT(finite_difference_check(f, w0[k], grads[k + 1], 1e-6).max_relative_error, 1e-4) << "W" << k + 1;
  }
}
