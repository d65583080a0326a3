#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "peq/dgp.hpp"
#include "peq/embed.hpp"
#include "peq/train.hpp"
#include "peq/types.hpp"

namespace peq::target {

// Affine map of the outcome range onto [margin, 1 - margin] so that Q values
// admit the logit fluctuation. factor() is the raw-to-scaled slope.
struct ScaleParams {
  double y_min = 0.0;
  double y_max = 1.0;
  double margin = 0.005;

  double factor() const { return (1.0 - 2.0 * margin) / (y_max - y_min); }
  double scale(double y) const { return margin + (y - y_min) * factor(); }
  double unscale(double s) const { return (s - margin) / factor() + y_min; }
};
ScaleParams fit_scale(const Dataset& ds, double margin = 0.005);

struct ClipBounds {
  double lo = 0.01;
  double hi = 0.99;
};

// Per-policy nuisance predictions on the evaluation set, raw outcome scale.
// q_obs[t] is Q_t at the observed action, q_cf[t] at the policy action, and
// g[t] the estimated P(A_t = 1 | H_t); each is one value per unit.
struct PolicyNuisance {
  std::vector<Eigen::VectorXd> q_obs;
  std::vector<Eigen::VectorXd> q_cf;
  std::vector<Eigen::VectorXd> g;
  Eigen::MatrixXi a_pol;
};

struct NuisanceValues {
  std::vector<PolicyNuisance> policy;
  Eigen::MatrixXi a_obs;
  Eigen::VectorXd y;
};

// Batched extraction from a trained estimator (shared net in joint mode, one
// net per policy in separate mode).
NuisanceValues net_nuisance_values(const Dataset& ds, const train::TrainedEstimator& est,
                                   const ActionMatrix& actions);

// Exact conditional-expectation tables for the two-step tabular generator;
// fixed-sequence policies only.
NuisanceValues tiny_oracle_values(const dgp::DgpSpec& spec, const Dataset& ds,
                                  const std::vector<Policy>& policies,
                                  const ActionMatrix& actions);

// argmin over [-5, 5] of mean_i w_i * BCE(sigmoid(logit_q_i + eps), target_i)
// + lambda * |eps|: 21-point grid scan, golden-section refinement to 1e-8,
// then an exact first-order polish. Weights must not all vanish.
double solve_fluctuation(const Eigen::VectorXd& logit_q, const Eigen::VectorXd& target,
                         const Eigen::VectorXd& w, double lambda);

struct PolicyEstimate {
  std::string label;
  double psi = 0.0;
  std::vector<double> epsilon;
  Eigen::VectorXd ic;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// One targeted CAPO: backward fluctuation pass with cumulative clever weights,
// then the plug-in mean of the updated step-1 Q at the policy action.
PolicyEstimate ltmle(const PolicyNuisance& nv, const Eigen::MatrixXi& a_obs,
                     const Eigen::VectorXd& y, const ScaleParams& sc, double lambda,
                     const ClipBounds& clip);

struct Contrast {
  int i = 0;
  int j = 0;
  double cate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Eigen::VectorXd ic;
};

struct EstimateReport {
  std::vector<PolicyEstimate> policies;
  std::vector<Contrast> contrasts;
  ScaleParams scale;
  double lambda = 0.0;
  ClipBounds clip;
};

EstimateReport estimate_from_values(const NuisanceValues& nv,
                                    const std::vector<std::string>& labels,
                                    const ScaleParams& sc, double lambda,
                                    const ClipBounds& clip);
EstimateReport estimate_all(const Dataset& eval_ds, const train::TrainedEstimator& est,
                            const ActionMatrix& actions, double lambda,
                            const ClipBounds& clip);
void write_estimates_csv(const std::string& path, const EstimateReport& report);

// Backward-recursive CAPO on the exact tiny tables (the plain two-stage
// regression construction, no reparameterization); exhaustive, no data.
double tiny_ice_capo(const dgp::DgpSpec& spec, const Policy& policy);

// Plug-in second-order remainder contrast, decomposed per step into the
// weight-difference, propensity-difference, and Q-difference terms, against
// oracle propensities and a nested Monte-Carlo outcome oracle.
struct RemainderPair {
  int i = 0;
  int j = 0;
  std::vector<double> term1;
  std::vector<double> term2;
  std::vector<double> term3;
  double sum1 = 0.0;
  double sum2 = 0.0;
  double sum3 = 0.0;
  double total = 0.0;
  double traj_mmd = 0.0;
};

struct RemainderDiagnostic {
  std::vector<RemainderPair> pairs;
};

RemainderDiagnostic remainder_diagnostic(const dgp::DgpSpec& spec, const Dataset& eval_ds,
                                         const train::TrainedEstimator& est,
                                         const ActionMatrix& actions,
                                         const std::vector<std::pair<int, int>>& pairs,
                                         int n_mc_qstar, std::uint64_t seed,
                                         const ClipBounds& clip,
                                         const embed::KernelConfig& kcfg);
void write_diagnostics_csv(const std::string& path, const RemainderDiagnostic& diag);

}  // namespace peq::target
