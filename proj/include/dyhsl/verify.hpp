#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dyhsl/gradcheck.hpp"
#include "dyhsl/multiscale.hpp"
#include "dyhsl/params.hpp"
#include "dyhsl/topology.hpp"

namespace dyhsl::verify {

/// N=6, T=12, T'=4, F=1, d=8, I=4, windows {1,2}, L_p=2, L_s=1.
ModelConfig tiny_config();

/// Random directed graph without self-loops; each ordered pair is an edge
/// with probability `density`, weights uniform in [0.5, 1.5].
RoadNetwork random_network(std::size_t n_nodes, double density, std::mt19937_64& rng);

/// Fixed random instance of a model together with one input window and a
/// target. Seeds are advanced until every ReLU input and MAE residual sits at
/// least `min_kink_margin` away from its kink and no horizon column has
/// residual signs that cancel exactly.
struct TinyProblem {
  ModelConfig config;
  RoadNetwork network;
  ModelParameters params;
  Tensor window;  // T x N x F
  Tensor target;  // T' x N
  std::uint64_t seed = 0;
  double kink_margin = 0.0;
};

TinyProblem make_tiny_problem(std::uint64_t seed, const ModelConfig& config = tiny_config(),
                              double min_kink_margin = 1e-4);

/// Finite-difference steps used by `gradient_oracle`: the starting step for
/// parameters the loss is piecewise polynomial in, the starting step for the
/// fusion logits, and the floor.
inline constexpr double kPolynomialStep = 1.0;
inline constexpr double kSmoothStep = 1e-2;
inline constexpr double kMinStep = 1e-7;

/// MAE loss of the problem's model at `params`; optionally reports the tape's
/// branch signature.
double problem_loss(const DyHSLModel& model, const TinyProblem& p, const ModelParameters& params,
                    std::uint64_t* signature = nullptr);

struct GroupCheck {
  std::string name;
  GradCheckResult result;
  /// Smallest step any coordinate of the group needed.
  double step = 0.0;
  /// True when even the smallest step moved some probe onto another piece.
  bool crossed_kink = false;
};

/// Finite-difference check of the MAE loss w.r.t. every parameter tensor.
/// Each coordinate uses Richardson-extrapolated central differences; its
/// step is halved (down to kMinStep) while any probe changes the branch
/// signature.
/// `corrupt_group`, when non-empty, scales that group's analytic gradient by
/// 1.01 before comparison (used to prove the check is sensitive).
std::vector<GroupCheck> gradient_oracle(const TinyProblem& problem, const std::string& corrupt_group = "");

struct OracleResult {
  std::string family;
  std::string name;
  double observed = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  /// Corrupt the W2 gradients inside the gradient oracle.
  bool corrupt_w2_gradient = false;
};

/// Runs every oracle family (gradient, factorization, straight-line,
/// structure, permutation, pooling, optimizer, low-rank) at fixed seeds.
std::vector<OracleResult> run_verification(const VerifyOptions& options = {});

}  // namespace dyhsl::verify
