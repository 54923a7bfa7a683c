#pragma once

// Ground-truth routes for the kernel-regime math and the empirical NTK.
//
// Nothing here shares code with the tape or the probe: the brute-force kernel runs its own
// naive-loop forward and backward passes and materializes every gradient row.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "ntklab/gram.hpp"
#include "ntklab/network.hpp"
#include "ntklab/probe.hpp"

namespace ntklab {

struct ResidualState {
  Eigen::VectorXd e;
  std::size_t t = 0;
};

/// e_{t+1} = (I - eta * K) e_t under a frozen kernel. Returns e_0 ... e_steps.
std::vector<ResidualState> evolve_residuals(const ResidualState& e0, const GramMatrix& kernel, double eta,
                                            std::size_t steps);

/// Closed form in the eigenbasis: component i of Q^T e_t is (1 - eta * lambda_i)^t (Q^T e_0)_i.
Eigen::VectorXd eigenmode_decay(const ResidualState& e0, const Spectrum& spectrum, double eta, std::size_t t);

/// Largest n * P the brute-force kernel will materialize.
inline constexpr std::size_t kBruteForceMaxEntries = 10'000'000;

/// Row i is the scalarized-output gradient of sample i, computed with naive loops.
Eigen::MatrixXd brute_force_jacobian(const Architecture& arch, const ParamVector& params, const ProbeSet& probe);

/// Pairwise dot products of brute_force_jacobian rows, accumulated in long double.
GramMatrix brute_force_ntk(const Architecture& arch, const ParamVector& params, const ProbeSet& probe);

/// Largest |a_ij - b_ij| / |b_ij| over all entries (0/0 counts as 0).
double max_relative_deviation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct LazyCheckReport {
  std::vector<ResidualState> actual;
  std::vector<ResidualState> predicted;
  /// |e_actual_t - e_predicted_t|_inf / |e_0|_inf for t = 0 ... steps.
  std::vector<double> deviation;
  double max_deviation = 0.0;
  double final_deviation = 0.0;
};

/// Full-batch gradient descent on 1/n * sum_i 0.5 * (s(f(x_i)) - y_i)^2 over the probe set,
/// run side by side with the frozen-kernel recursion. The 1/n factor is folded into the step:
/// the prediction uses e_{t+1} = (I - (eta / n) K_0) e_t.
LazyCheckReport lazy_training_check(const Architecture& arch, const ParamVector& params, const ProbeSet& probe,
                                    std::span<const double> targets, double eta, std::size_t steps);

}  // namespace ntklab
