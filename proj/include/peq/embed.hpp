#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "peq/types.hpp"

namespace peq::embed {

struct KernelConfig {
  // Per-step exponent scales for k(z,z') = exp(-gamma_t ||z-z'||^2). Empty
  // means fit every gamma_t with the median heuristic.
  std::vector<double> gamma_t;
  int heuristic_sample = 500;
  double gamma_multiplier = 1.0;
  // Stream for the heuristic subsample; fixed so runs are reproducible.
  std::uint64_t heuristic_seed = 0x6b8b4567327b23c6ULL;
};

struct DistanceMatrices {
  std::vector<Eigen::MatrixXd> d_t;  // per step, K x K
  std::vector<double> scale_t;       // max entry before normalization
  std::vector<double> gamma_t;
  bool normalized = true;
};

struct PolicyEmbedding {
  std::vector<Eigen::MatrixXd> rho_t;  // per step, K x dim
  std::vector<double> stress_t;
  int dim = 2;
};

struct SmacofResult {
  Eigen::MatrixXd x;  // K x dim
  double stress = 0.0;
  std::vector<double> stress_history;
};

// Flattened (L_1..L_t, A_1..A_{t-1}) feature rows for every trajectory.
Eigen::MatrixXd history_features(const Dataset& ds, int t);

// gamma = gamma_multiplier / (2 * median pairwise Euclidean distance) over the
// rows of `points`, subsampled to cfg.heuristic_sample; 1.0 when the median
// degenerates to zero.
double median_bandwidth(const Eigen::MatrixXd& points, const KernelConfig& cfg);

// V-statistic MMD between two point sets under the normalized Gaussian kernel.
double mmd(const Eigen::MatrixXd& z_i, const Eigen::MatrixXd& z_j, double gamma);

// Per-step K x K MMD distance matrices over (history, policy action) points,
// each normalized by its max entry.
DistanceMatrices distance_matrices(const Dataset& ds, const ActionMatrix& actions,
                                   KernelConfig cfg);

SmacofResult smacof_mds(const Eigen::MatrixXd& d, int dim, int max_iter = 300,
                        double tol = 1e-9, std::uint64_t seed = 0);

PolicyEmbedding embed_policies(const Dataset& ds, const ActionMatrix& actions,
                               KernelConfig cfg, int dim = 2);

// Fixed-sequence shortcut: skip MDS and feed each policy's own actions as
// 1-dimensional embedding rows.
PolicyEmbedding deterministic_bypass(const std::vector<Policy>& ps, int tau);

// Trajectory-level MMD between two policies under the product kernel over t.
double trajectory_mmd(const Dataset& ds, int i, int j, const ActionMatrix& actions,
                      KernelConfig cfg);

}  // namespace peq::embed
