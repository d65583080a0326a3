#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "peq/rng.hpp"
#include "peq/types.hpp"

namespace peq::dgp {

enum class Variant { limited, expanded, tiny };

// Tabular two-step environment with binary covariates. All conditional
// expectations are exhaustively computable, which gives exact oracles.
struct TinyTables {
  double p_l1 = 0.4;                 // P(L1 = 1)
  double p_a1[2] = {0.35, 0.65};     // P(A1 = 1 | L1)
  double p_l2[2][2] = {{0.30, 0.60},
                       {0.45, 0.75}};  // P(L2 = 1 | L1, A1)
  double p_a2[2][2][2] = {{{0.30, 0.55}, {0.40, 0.70}},
                          {{0.25, 0.50}, {0.45, 0.75}}};  // P(A2=1 | L1,A1,L2)
  double mu_y[2][2][2][2] = {{{{0.15, 0.35}, {0.30, 0.50}},
                              {{0.45, 0.40}, {0.60, 0.55}}},
                             {{{0.25, 0.45}, {0.40, 0.60}},
                              {{0.60, 0.55}, {0.75, 0.70}}}};  // E[Y | L1,A1,L2,A2]
};

struct DgpSpec {
  Variant variant = Variant::limited;
  int tau = 15;
  int d_x = 10;
  int d_z = 5;
  int lag = 8;
  double noise_sd_a = 0.5;
  double noise_sd_y = 0.5;
  double noise_sd_z = 0.3;
  std::array<double, 3> omega{0.37, 0.42, 0.29};
  // Scales the covariate process (inits and innovations of X and Z). 0 pins
  // the covariates at zero; used by closed-form tests and sensitivity runs.
  double x_scale = 1.0;
  std::uint64_t seed = 0;
  TinyTables tiny;

  int d_l() const;
  // tiny ignores the tau field and always runs two steps
  int effective_tau() const { return variant == Variant::tiny ? 2 : tau; }
};

void validate(const DgpSpec& spec);

struct OracleResult {
  double value = 0.0;
  double mc_std_error = 0.0;
  std::int64_t n_mc = 0;
  bool exhaustive = false;
};

Dataset simulate(const DgpSpec& spec, int n);
Dataset simulate_limited(const DgpSpec& spec, int n);
Dataset simulate_expanded(const DgpSpec& spec, int n);
Dataset simulate_tiny(const DgpSpec& spec, int n);

// P(A_t = 1 | H_t) of the behavior rule. Limited/expanded: Phi(s/noise_sd_a)
// with s the deterministic score inside the sigmoid; tiny: table lookup.
double oracle_propensity(const DgpSpec& spec, const HistoryView& h);

// Ground truth E[Y(policy)] by forced-action rollouts (exhaustive enumeration
// for the tiny variant). Policies must be deterministic.
OracleResult oracle_capo(const DgpSpec& spec, const Policy& p, std::int64_t n_mc,
                         std::uint64_t seed);
// Paired difference with common random numbers.
OracleResult oracle_cate(const DgpSpec& spec, const Policy& p_i, const Policy& p_j,
                         std::int64_t n_mc, std::uint64_t seed);

// The deterministic part of the behavior score at step t, recomputed from an
// observed prefix. Exposed for apply_policy and the propensity oracle.
double behavior_score(const DgpSpec& spec, const Trajectory& traj, int t);

// Decision of a deterministic policy at an observed history.
int policy_action(const Policy& p, const DgpSpec& spec, const Trajectory& traj, int t);

// Generator state mid-trajectory, reconstructed from observed data through
// L_s and A_s (outcomes through Y_{s-1}). rollout_from redraws Y_s.. onward,
// choosing later actions by the policy; used by the nested Q* oracle.
struct ResumeState {
  int s = 0;
  Eigen::MatrixXd x;       // d_x columns, rows 1..s (expanded: d_x + d_z)
  std::vector<double> y;   // y[0] = 0 .. y[s-1]
  std::vector<int> a;      // a[1] .. a[s]
  double ell = 0.0;        // adherence variable after step s-1
};
ResumeState reconstruct_state(const DgpSpec& spec, const Trajectory& traj, int s);
double rollout_from(const DgpSpec& spec, const ResumeState& st, const Policy& p, Rng& rng);

// Full-trajectory forced rollout; returns the terminal outcome.
double rollout_final_outcome(const DgpSpec& spec, const Policy& p, Rng& rng);

// One forced draw from the tiny tables (Monte-Carlo counterpart of the
// exhaustive enumeration, used to cross-check it).
double tiny_rollout_outcome(const DgpSpec& spec, const Policy& p, Rng& rng);

// Exhaustive tiny-variant CAPO used wherever enumeration replaces Monte Carlo.
double tiny_exhaustive_capo(const DgpSpec& spec, const Policy& p);

}  // namespace peq::dgp
