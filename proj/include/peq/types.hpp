#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "peq/errors.hpp"

namespace peq {

namespace dgp {
struct DgpSpec;
}

// One unit: covariate rows L_1..L_tau (row t-1 holds L_t), binary actions
// A_1..A_tau and the terminal outcome Y.
struct Trajectory {
  std::string id;
  Eigen::MatrixXd covariates;  // tau x d_l
  std::vector<int> actions;    // length tau, entries in {0,1}
  double outcome = 0.0;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  int tau = 0;
  int d_l = 0;
  std::pair<double, double> outcome_bounds{0.0, 0.0};

  int n() const { return static_cast<int>(trajectories.size()); }
};

// Validates shapes, fills outcome_bounds with the observed min/max.
Dataset make_dataset(std::vector<Trajectory> trajectories, int tau = -1, int d_l = -1);

// Read-only window H_t = (L_1..L_t, A_1..A_{t-1}). Indices are 1-based;
// anything beyond the window throws MaskedAccessError.
class HistoryView {
 public:
  HistoryView(const Trajectory& traj, int t);

  int t() const { return t_; }
  int d_l() const { return static_cast<int>(traj_->covariates.cols()); }

  Eigen::VectorXd covariate(int s) const;
  int action(int s) const;

  // concatenated (L_1, ..., L_t, A_1, ..., A_{t-1})
  Eigen::VectorXd flattened() const;

 private:
  const Trajectory* traj_;
  int t_;
};

enum class PolicyKind { threshold, fixed_sequence, behavior_stochastic };

// A counterfactual treatment rule. Threshold policies reuse the generator's
// deterministic score: action 1 iff sigmoid(score(H_t)) > gamma_t.
struct Policy {
  PolicyKind kind = PolicyKind::fixed_sequence;
  std::string label;
  std::vector<double> thresholds;  // per-step gamma, threshold kind only
  std::vector<int> sequence;       // fixed_sequence kind only

  static Policy threshold(std::string label, std::vector<double> gammas);
  static Policy constant_threshold(std::string label, double gamma, int tau);
  static Policy fixed(std::string label, std::vector<int> seq);
  static Policy behavior(std::string label);
};

// Counterfactual action assignments: one n x tau {0,1} matrix per policy.
struct ActionMatrix {
  std::vector<Eigen::MatrixXi> policy_actions;

  int n_policies() const { return static_cast<int>(policy_actions.size()); }
  int n() const { return policy_actions.empty() ? 0 : static_cast<int>(policy_actions[0].rows()); }
  int tau() const { return policy_actions.empty() ? 0 : static_cast<int>(policy_actions[0].cols()); }
};

// Evaluates the policy's action at every observed history. Threshold policies
// need the generator spec for the score; fixed sequences do not.
Eigen::MatrixXi apply_policy(const Policy& p, const Dataset& ds,
                             const dgp::DgpSpec* spec = nullptr);
ActionMatrix apply_policies(const std::vector<Policy>& ps, const Dataset& ds,
                            const dgp::DgpSpec* spec = nullptr);

}  // namespace peq
