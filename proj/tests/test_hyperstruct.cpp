#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <random>

#include "dyhsl/error.hpp"
#include "dyhsl/gradcheck.hpp"
#include "dyhsl/hyperstruct.hpp"
#include "dyhsl/ops.hpp"

using namespace dyhsl;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

HyperVars vars(Tape& tape, const Tensor& w, const Tensor& u) { return {tape.constant(w), tape.constant(u)}; }

// Direct evaluation of one layer with Eigen: H <- L (relu(U L^T H) + L^T H), L = H W.
RowMatrix brute_layer(const RowMatrix& h, const RowMatrix& w, const RowMatrix& u) {
  const RowMatrix l = h * w;
  const RowMatrix lth = l.transpose() * h;
  const RowMatrix e = (u * lth).cwiseMax(0.0) + lth;
  return l * e;
}

}  // namespace

TEST(LearnIncidence, Examples) {
  Tape tape;
  const Tensor w = Tensor::matrix({{2, 3}, {4, 5}});
  EXPECT_EQ(learn_incidence(tape.constant(Tensor::zeros(3, 2)), vars(tape, w, Tensor::zeros(2, 2))).value(),
            Tensor::zeros(3, 2));
  const Tensor h = Tensor::matrix({{1, -2}, {0.5, 3}});
  EXPECT_EQ(learn_incidence(tape.constant(h), vars(tape, Tensor::identity(2), Tensor::zeros(2, 2))).value(), h);
  EXPECT_EQ(learn_incidence(tape.constant(Tensor::identity(2)), vars(tape, w, Tensor::zeros(2, 2))).value(), w);
  EXPECT_THROW(learn_incidence(tape.constant(Tensor::zeros(3, 3)), vars(tape, w, Tensor::zeros(2, 2))),
               DimensionError);
}

TEST(HyperedgeEmbed, Examples) {
  std::mt19937_64 rng(1);
  Tape tape;
  const Tensor h = random_tensor({4, 3}, rng), lambda = random_tensor({4, 2}, rng);
  const HyperVars zero_u = vars(tape, Tensor::zeros(3, 2), Tensor::zeros(2, 2));
  const Tensor residual = matmul(transpose(tape.constant(lambda)), tape.constant(h)).value();
  EXPECT_LT(max_abs_diff(hyperedge_embed(tape.constant(h), tape.constant(lambda), zero_u).value(), residual), 1e-15);
  EXPECT_EQ(hyperedge_embed(tape.constant(h), tape.constant(Tensor::zeros(4, 2)), vars(tape, Tensor::zeros(3, 2),
                                                                                         random_tensor({2, 2}, rng)))
                .value(),
            Tensor::zeros(2, 3));

  // Lambda^T H = [[-2, 3]] with I = 1, U = [[1]].
  const Tensor e = hyperedge_embed(tape.constant(Tensor::matrix({{-2, 3}})), tape.constant(Tensor::matrix({{1}})),
                                   vars(tape, Tensor::zeros(2, 1), Tensor::matrix({{1}})))
                       .value();
  EXPECT_EQ(e, Tensor::matrix({{-2, 6}}));
}

TEST(HypergraphConvolve, Examples) {
  Tape tape;
  EXPECT_EQ(hypergraph_convolve(tape.constant(Tensor::matrix({{1}, {2}})), tape.constant(Tensor::matrix({{1, 1}})))
                .value(),
            Tensor::matrix({{1, 1}, {2, 2}}));
  const Tensor e = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  const Tensor one_hot = Tensor::matrix({{0, 0, 1}, {1, 0, 0}});
  EXPECT_EQ(hypergraph_convolve(tape.constant(one_hot), tape.constant(e)).value(), Tensor::matrix({{5, 6}, {1, 2}}));
  EXPECT_EQ(hypergraph_convolve(tape.constant(Tensor::zeros(2, 3)), tape.constant(e)).value(), Tensor::zeros(2, 2));
}

TEST(DhslBlock, OneLayerIsTheComposition) {
  std::mt19937_64 rng(2);
  Tape tape;
  const Tensor h = random_tensor({5, 3}, rng);
  const HyperVars p = vars(tape, random_tensor({3, 2}, rng), random_tensor({2, 2}, rng));
  Var hv = tape.constant(h);
  Var lambda = learn_incidence(hv, p);
  const Tensor composed = hypergraph_convolve(lambda, hyperedge_embed(hv, lambda, p)).value();
  EXPECT_EQ(dhsl_block(hv, p, 1).value(), composed);
}

TEST(DhslBlock, ZeroIsAFixedPoint) {
  std::mt19937_64 rng(3);
  Tape tape;
  const HyperVars p = vars(tape, random_tensor({3, 2}, rng), random_tensor({2, 2}, rng));
  EXPECT_EQ(dhsl_block(tape.constant(Tensor::zeros(4, 3)), p, 3).value(), Tensor::zeros(4, 3));
}

TEST(DhslBlock, TwoLayersMatchBruteForce) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    const Tensor h = random_tensor({3, 4}, rng), w = random_tensor({4, 2}, rng), u = random_tensor({2, 2}, rng);
    std::vector<Tensor> trace;
    const Tensor got = dhsl_block(tape.constant(h), vars(tape, w, u), 2, &trace).value();
    const RowMatrix expect = brute_layer(brute_layer(h.mat(), w.mat(), u.mat()), w.mat(), u.mat());
    EXPECT_LT((got.mat() - expect).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
    ASSERT_EQ(trace.size(), 2u);
    EXPECT_EQ(trace[0], Tensor::from_eigen(h.mat() * w.mat()));
  }
}

TEST(DhslBlock, ZeroLayersIsAConfigError) {
  Tape tape;
  EXPECT_THROW(dhsl_block(tape.constant(Tensor::zeros(2, 2)), vars(tape, Tensor::zeros(2, 2), Tensor::zeros(2, 2)), 0),
               ConfigError);
}

TEST(DhslBlock, RowPermutationEquivariance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    const Tensor h = random_tensor({7, 3}, rng);
    const HyperVars p = vars(tape, random_tensor({3, 4}, rng), random_tensor({4, 4}, rng));
    std::vector<std::size_t> perm{3, 6, 0, 1, 5, 2, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    const Tensor expect = gather_rows(dhsl_block(tape.constant(h), p, 2), perm).value();
    const Tensor got = dhsl_block(gather_rows(tape.constant(h), perm), p, 2).value();
    EXPECT_LT(max_abs_diff(got, expect), 1e-12 * std::max(1.0, expect.mat().cwiseAbs().maxCoeff()));
  }
}

TEST(LearnIncidence, LowRank) {
  std::mt19937_64 rng(6);
  for (auto [d, i] : {std::pair<std::size_t, std::size_t>{3, 6}, {6, 3}, {2, 5}}) {
    Tape tape;
    const Tensor lambda =
        learn_incidence(tape.constant(random_tensor({30, d}, rng)), vars(tape, random_tensor({d, i}, rng),
                                                                          Tensor::zeros(i, i)))
            .value();
    const auto s = Eigen::JacobiSVD<RowMatrix>(lambda.mat()).singularValues();
    const std::size_t r = std::min(d, i);
    if (r < static_cast<std::size_t>(s.size())) {
      EXPECT_LT(s(static_cast<Eigen::Index>(r)) / s(0), 1e-9);
    }
    EXPECT_GT(s(static_cast<Eigen::Index>(r - 1)) / s(0), 1e-6);
  }
}

TEST(DhslBlock, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Tensor h0 = random_tensor({5, 3}, rng), w0 = random_tensor({3, 2}, rng), u0 = random_tensor({2, 2}, rng);
  const Tensor up = random_tensor({5, 3}, rng);
  auto loss_of = [&](const Tensor& h, const Tensor& w, const Tensor& u, Tensor* gh, Tensor* gw, Tensor* gu) {
    Tape tape;
    Var hv = tape.leaf(h, "h");
    HyperVars p{tape.leaf(w, "w"), tape.leaf(u, "u")};
    Var loss = sum(hadamard(dhsl_block(hv, p, 1), tape.constant(up)));
    if (gh) {
      tape.backward(loss);
      *gh = tape.grad(hv);
      *gw = tape.grad(p.incidence_factor);
      *gu = tape.grad(p.hyperedge_relations);
    }
    return loss.value()[0];
  };
  Tensor gh, gw, gu;
  loss_of(h0, w0, u0, &gh, &gw, &gu);
  auto fh = [&](const Tensor& x) { return loss_of(x, w0, u0, nullptr, nullptr, nullptr); };
  auto fw = [&](const Tensor& x) { return loss_of(h0, x, u0, nullptr, nullptr, nullptr); };
  auto fu = [&](const Tensor& x) { return loss_of(h0, w0, x, nullptr, nullptr, nullptr); };
  EXPECT_LT(finite_difference_check(fh, h0, gh, 1e-6).max_relative_error, 1e-4);
  EXPECT_LT(finite_difference_check(fw, w0, gw, 1e-6).max_relative_error, 1e-4);
  EXPECT_LT(finite_difference_check(fu, u0, gu, 1e-6).max_relative_error, 1e-4);
}
