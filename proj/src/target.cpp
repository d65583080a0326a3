#include "peq/target.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "peq/errors.hpp"
#include "peq/net.hpp"

namespace peq::target {

namespace {

constexpr double kQClamp = 1e-6;
constexpr double kEpsLo = -5.0;
constexpr double kEpsHi = 5.0;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string num(double v) { return nlohmann::json(v).dump(); }

// mean_i w_i * BCE(sigmoid(z_i + eps), y_i) + lambda * |eps|
double fluct_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double lambda, double eps) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (w(i) == 0.0) continue;
    const double zi = z(i) + eps;
    s += w(i) * (std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - zi * y(i));
  }
  return s / static_cast<double>(z.size()) + lambda * std::abs(eps);
}

// derivative of the unpenalized part: mean_i w_i (sigmoid(z_i + eps) - y_i)
double fluct_score(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w, double eps) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (w(i) == 0.0) continue;
    s += w(i) * (sigmoid(z(i) + eps) - y(i));
  }
  return s / static_cast<double>(z.size());
}

Eigen::VectorXd scaled_logit_q(const Eigen::VectorXd& q_raw, const ScaleParams& sc) {
  Eigen::VectorXd z(q_raw.size());
  for (Eigen::Index i = 0; i < q_raw.size(); ++i)
    z(i) = logit(std::clamp(sc.scale(q_raw(i)), kQClamp, 1.0 - kQClamp));
  return z;
}

double sample_se(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

// cumulative clever weights; throws if some step has no on-policy mass
Eigen::MatrixXd clever_weights(const PolicyNuisance& nv, const Eigen::MatrixXi& a_obs,
                               const ClipBounds& clip) {
  const Eigen::Index n = a_obs.rows();
  const int tau = static_cast<int>(a_obs.cols());
  Eigen::MatrixXd w(n, tau);
  Eigen::VectorXd cur = Eigen::VectorXd::Ones(n);
  for (int t = 1; t <= tau; ++t) {
    const Eigen::VectorXd& g = nv.g[static_cast<std::size_t>(t - 1)];
    for (Eigen::Index u = 0; u < n; ++u) {
      const int ap = nv.a_pol(u, t - 1);
      double eta = ap == 1 ? g(u) : 1.0 - g(u);
      eta = std::clamp(eta, clip.lo, clip.hi);
      const double ind = a_obs(u, t - 1) == ap ? 1.0 : 0.0;
      cur(u) *= ind / eta;
    }
    if (cur.maxCoeff() <= 0.0)
      throw DegenerateSupportError("no trajectory follows the policy through step " +
                                   std::to_string(t));
    w.col(t - 1) = cur;
  }
  return w;
}

}  // namespace

ScaleParams fit_scale(const Dataset& ds, double margin) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& tr : ds.trajectories) {
    lo = std::min(lo, tr.outcome);
    hi = std::max(hi, tr.outcome);
  }
  if (!(hi > lo)) throw DegenerateSupportError("outcome range is degenerate");
  return ScaleParams{lo, hi, margin};
}

double solve_fluctuation(const Eigen::VectorXd& logit_q, const Eigen::VectorXd& target,
                         const Eigen::VectorXd& w, double lambda) {
  if (logit_q.size() != target.size() || logit_q.size() != w.size())
    throw ShapeError("fluctuation inputs must have one entry per unit");
  if (w.maxCoeff() <= 0.0) throw std::invalid_argument("all fluctuation weights vanish");
  if (lambda < 0.0) throw std::invalid_argument("negative regularization coefficient");

  auto obj = [&](double e) { return fluct_objective(logit_q, target, w, lambda, e); };

  // grid pre-scan to land near the global basin
  double best = 0.0;
  double best_f = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 21;
  for (int i = 0; i < kGrid; ++i) {
    const double e = kEpsLo + (kEpsHi - kEpsLo) * i / (kGrid - 1);
    const double f = obj(e);
    if (f < best_f) {
      best_f = f;
      best = e;
    }
  }

  // golden-section refinement on the bracketing cells
  const double step = (kEpsHi - kEpsLo) / (kGrid - 1);
  double a = std::max(kEpsLo, best - step);
  double b = std::min(kEpsHi, best + step);
  constexpr double kGold = 0.6180339887498949;
  double x1 = b - kGold * (b - a);
  double x2 = a + kGold * (b - a);
  double f1 = obj(x1);
  double f2 = obj(x2);
  while (b - a > 1e-8) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGold * (b - a);
      f1 = obj(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGold * (b - a);
      f2 = obj(x2);
    }
  }
  double golden = 0.5 * (a + b);

  // exact first-order polish: the unpenalized score is strictly increasing,
  // so the optimum is 0 (subgradient condition) or a bisection root
  const double s0 = fluct_score(logit_q, target, w, 0.0);
  double polished;
  if (std::abs(s0) <= lambda) {
    polished = 0.0;
  } else {
    const double root_target = s0 > lambda ? lambda : -lambda;
    double lo = s0 > lambda ? kEpsLo : 0.0;
    double hi = s0 > lambda ? 0.0 : kEpsHi;
    if (fluct_score(logit_q, target, w, lo) - root_target > 0.0) {
      polished = lo;
    } else if (fluct_score(logit_q, target, w, hi) - root_target < 0.0) {
      polished = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (fluct_score(logit_q, target, w, mid) - root_target < 0.0)
          lo = mid;
        else
          hi = mid;
      }
      polished = 0.5 * (lo + hi);
    }
  }

  return obj(polished) <= obj(golden) ? polished : golden;
}

PolicyEstimate ltmle(const PolicyNuisance& nv, const Eigen::MatrixXi& a_obs,
                     const Eigen::VectorXd& y, const ScaleParams& sc, double lambda,
                     const ClipBounds& clip) {
  const Eigen::Index n = y.size();
  const int tau = static_cast<int>(a_obs.cols());
  if (static_cast<int>(nv.q_cf.size()) != tau || static_cast<int>(nv.g.size()) != tau)
    throw ShapeError("nuisance values must cover every step");
  if (nv.a_pol.rows() != n || a_obs.rows() != n)
    throw ShapeError("nuisance values must cover every unit");
  if (!(clip.lo > 0.0 && clip.lo < clip.hi && clip.hi < 1.0))
    throw ConfigError("weight clip bounds must satisfy 0 < lo < hi < 1");

  const Eigen::MatrixXd w = clever_weights(nv, a_obs, clip);

  Eigen::VectorXd y_scaled(n);
  for (Eigen::Index u = 0; u < n; ++u) y_scaled(u) = sc.scale(y(u));

  std::vector<Eigen::VectorXd> q_up(static_cast<std::size_t>(tau));
  PolicyEstimate est;
  est.epsilon.assign(static_cast<std::size_t>(tau), 0.0);

  Eigen::VectorXd targ = y_scaled;
  for (int t = tau; t >= 1; --t) {
    const Eigen::VectorXd z = scaled_logit_q(nv.q_cf[static_cast<std::size_t>(t - 1)], sc);
    const double eps = solve_fluctuation(z, targ, w.col(t - 1), lambda);
    est.epsilon[static_cast<std::size_t>(t - 1)] = eps;
    Eigen::VectorXd up(n);
    for (Eigen::Index u = 0; u < n; ++u) up(u) = sigmoid(z(u) + eps);
    q_up[static_cast<std::size_t>(t - 1)] = up;
    targ = q_up[static_cast<std::size_t>(t - 1)];
  }

  const double psi_scaled = q_up[0].mean();
  Eigen::VectorXd ic_scaled = Eigen::VectorXd::Zero(n);
  for (int t = 1; t <= tau; ++t) {
    const Eigen::VectorXd& next =
        t == tau ? y_scaled : q_up[static_cast<std::size_t>(t)];
    ic_scaled += w.col(t - 1).cwiseProduct(next - q_up[static_cast<std::size_t>(t - 1)]);
  }
  ic_scaled += q_up[0];
  ic_scaled.array() -= psi_scaled;

  est.psi = sc.unscale(psi_scaled);
  est.ic = ic_scaled / sc.factor();
  est.se = sample_se(est.ic);
  est.ci_lo = est.psi - 1.96 * est.se;
  est.ci_hi = est.psi + 1.96 * est.se;
  return est;
}

NuisanceValues net_nuisance_values(const Dataset& ds, const train::TrainedEstimator& est,
                                   const ActionMatrix& actions) {
  const int n = ds.n();
  const int tau = ds.tau;
  const int k_pol = static_cast<int>(est.policies.size());
  if (actions.n_policies() != k_pol || actions.n() != n || actions.tau() != tau)
    throw ShapeError("action matrix does not match the estimator and dataset");

  NuisanceValues nv;
  nv.a_obs.resize(n, tau);
  nv.y.resize(n);
  for (int u = 0; u < n; ++u) {
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(u)];
    for (int t = 0; t < tau; ++t) nv.a_obs(u, t) = tr.actions[static_cast<std::size_t>(t)];
    nv.y(u) = tr.outcome;
  }

  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);

  const bool joint = est.mode == train::Mode::joint_peq;
  net::EncoderCache enc_joint;
  if (joint) enc_joint = net::encode_history(est.thetas[0], ds, rows);

  for (int k = 0; k < k_pol; ++k) {
    const net::ModelParams& theta = joint ? est.thetas[0] : est.thetas[static_cast<std::size_t>(k)];
    const embed::PolicyEmbedding& emb =
        joint ? est.embeddings[0] : est.embeddings[static_cast<std::size_t>(k)];
    const int row = joint ? k : 0;

    const net::EncoderCache enc = joint ? enc_joint : net::encode_history(theta, ds, rows);
    Eigen::MatrixXd rho(tau, emb.dim);
    for (int t = 0; t < tau; ++t) rho.row(t) = emb.rho_t[static_cast<std::size_t>(t)].row(row);
    const net::TailCache tail = net::encode_tail_all(theta, rho);

    PolicyNuisance pn;
    pn.a_pol = actions.policy_actions[static_cast<std::size_t>(k)];
    for (int t = 1; t <= tau; ++t) {
      const Eigen::MatrixXd& h = enc.h[static_cast<std::size_t>(t)];
      const Eigen::VectorXd logits = net::head_forward(theta.g_head, h, 0.0, nullptr, nullptr);
      Eigen::VectorXd g(n);
      for (int u = 0; u < n; ++u) g(u) = sigmoid(logits(u));
      pn.g.push_back(std::move(g));

      Eigen::VectorXd a_obs_col = nv.a_obs.col(t - 1).cast<double>();
      Eigen::VectorXd a_pol_col = pn.a_pol.col(t - 1).cast<double>();
      const Eigen::VectorXd& e_next = tail.e[static_cast<std::size_t>(t + 1)];
      pn.q_obs.push_back(
          net::head_forward(theta.q_head, net::q_input(h, a_obs_col, e_next), 0.0, nullptr, nullptr));
      pn.q_cf.push_back(
          net::head_forward(theta.q_head, net::q_input(h, a_pol_col, e_next), 0.0, nullptr, nullptr));
    }
    nv.policy.push_back(std::move(pn));
  }
  return nv;
}

namespace {

// ICE step-1 regression on the exact tables: Q_1(a1, l1) under a fixed policy
double tiny_q1(const dgp::TinyTables& tb, int l1, int a1, int a2_forced) {
  double s = 0.0;
  for (int l2 = 0; l2 <= 1; ++l2) {
    const double p = l2 == 1 ? tb.p_l2[l1][a1] : 1.0 - tb.p_l2[l1][a1];
    s += p * tb.mu_y[l1][a1][l2][a2_forced];
  }
  return s;
}

void require_fixed(const Policy& p) {
  if (p.kind != PolicyKind::fixed_sequence)
    throw std::invalid_argument("tiny-table oracles support fixed-sequence policies only");
}

}  // namespace

NuisanceValues tiny_oracle_values(const dgp::DgpSpec& spec, const Dataset& ds,
                                  const std::vector<Policy>& policies,
                                  const ActionMatrix& actions) {
  if (spec.variant != dgp::Variant::tiny)
    throw std::invalid_argument("oracle tables exist for the tiny variant only");
  const dgp::TinyTables& tb = spec.tiny;
  const int n = ds.n();

  NuisanceValues nv;
  nv.a_obs.resize(n, 2);
  nv.y.resize(n);
  for (int u = 0; u < n; ++u) {
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(u)];
    nv.a_obs(u, 0) = tr.actions[0];
    nv.a_obs(u, 1) = tr.actions[1];
    nv.y(u) = tr.outcome;
  }

  for (std::size_t k = 0; k < policies.size(); ++k) {
    require_fixed(policies[k]);
    PolicyNuisance pn;
    pn.a_pol = actions.policy_actions[k];
    const int dot_a2 = policies[k].sequence[1];
    Eigen::VectorXd g1(n), g2(n), qo1(n), qc1(n), qo2(n), qc2(n);
    for (int u = 0; u < n; ++u) {
      const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(u)];
      const int l1 = static_cast<int>(tr.covariates(0, 0));
      const int l2 = static_cast<int>(tr.covariates(1, 0));
      const int a1 = tr.actions[0];
      const int a2 = tr.actions[1];
      g1(u) = tb.p_a1[l1];
      g2(u) = tb.p_a2[l1][a1][l2];
      qo2(u) = tb.mu_y[l1][a1][l2][a2];
      qc2(u) = tb.mu_y[l1][a1][l2][pn.a_pol(u, 1)];
      qo1(u) = tiny_q1(tb, l1, a1, dot_a2);
      qc1(u) = tiny_q1(tb, l1, pn.a_pol(u, 0), dot_a2);
    }
    pn.g = {g1, g2};
    pn.q_obs = {qo1, qo2};
    pn.q_cf = {qc1, qc2};
    nv.policy.push_back(std::move(pn));
  }
  return nv;
}

double tiny_ice_capo(const dgp::DgpSpec& spec, const Policy& policy) {
  if (spec.variant != dgp::Variant::tiny)
    throw std::invalid_argument("oracle tables exist for the tiny variant only");
  require_fixed(policy);
  const dgp::TinyTables& tb = spec.tiny;
  const int a1 = policy.sequence[0];
  const int a2 = policy.sequence[1];
  double psi = 0.0;
  for (int l1 = 0; l1 <= 1; ++l1) {
    const double p = l1 == 1 ? tb.p_l1 : 1.0 - tb.p_l1;
    psi += p * tiny_q1(tb, l1, a1, a2);
  }
  return psi;
}

EstimateReport estimate_from_values(const NuisanceValues& nv,
                                    const std::vector<std::string>& labels,
                                    const ScaleParams& sc, double lambda,
                                    const ClipBounds& clip) {
  EstimateReport report;
  report.scale = sc;
  report.lambda = lambda;
  report.clip = clip;
  for (std::size_t k = 0; k < nv.policy.size(); ++k) {
    PolicyEstimate est = ltmle(nv.policy[k], nv.a_obs, nv.y, sc, lambda, clip);
    est.label = k < labels.size() ? labels[k] : "policy_" + std::to_string(k);
    report.policies.push_back(std::move(est));
  }
  const int k_pol = static_cast<int>(report.policies.size());
  for (int i = 0; i < k_pol; ++i)
    for (int j = 0; j < k_pol; ++j) {
      if (i == j) continue;
      Contrast c;
      c.i = i;
      c.j = j;
      c.cate = report.policies[static_cast<std::size_t>(i)].psi -
               report.policies[static_cast<std::size_t>(j)].psi;
      c.ic = report.policies[static_cast<std::size_t>(i)].ic -
             report.policies[static_cast<std::size_t>(j)].ic;
      c.se = sample_se(c.ic);
      c.ci_lo = c.cate - 1.96 * c.se;
      c.ci_hi = c.cate + 1.96 * c.se;
      report.contrasts.push_back(std::move(c));
    }
  return report;
}

EstimateReport estimate_all(const Dataset& eval_ds, const train::TrainedEstimator& est,
                            const ActionMatrix& actions, double lambda,
                            const ClipBounds& clip) {
  const NuisanceValues nv = net_nuisance_values(eval_ds, est, actions);
  std::vector<std::string> labels;
  for (const auto& p : est.policies) labels.push_back(p.label);
  return estimate_from_values(nv, labels, fit_scale(eval_ds), lambda, clip);
}

void write_estimates_csv(const std::string& path, const EstimateReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int tau =
      report.policies.empty() ? 0 : static_cast<int>(report.policies[0].epsilon.size());
  out << "label,psi_hat,se,ci_lo,ci_hi";
  for (int t = 1; t <= tau; ++t) out << ",epsilon_" << t;
  out << "\n";
  for (const auto& p : report.policies) {
    out << p.label << "," << num(p.psi) << "," << num(p.se) << "," << num(p.ci_lo) << ","
        << num(p.ci_hi);
    for (double e : p.epsilon) out << "," << num(e);
    out << "\n";
  }
  for (const auto& c : report.contrasts) {
    out << report.policies[static_cast<std::size_t>(c.i)].label << "-"
        << report.policies[static_cast<std::size_t>(c.j)].label << "," << num(c.cate) << ","
        << num(c.se) << "," << num(c.ci_lo) << "," << num(c.ci_hi);
    for (int t = 0; t < tau; ++t) out << ",";
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

namespace {

// per-policy ingredient arrays for the remainder decomposition, step s = 1..tau-1
struct RemainderSide {
  Eigen::MatrixXd w;
  Eigen::MatrixXd xi_g;
  Eigen::MatrixXd xi_q;
};

RemainderSide remainder_side(const dgp::DgpSpec& spec, const Dataset& ds,
                             const PolicyNuisance& pn, const Eigen::MatrixXi& a_obs,
                             int n_mc, std::uint64_t seed, const ClipBounds& clip,
                             const Policy& policy) {
  const int n = ds.n();
  const int tau = ds.tau;
  RemainderSide side;
  side.w.resize(n, tau - 1);
  side.xi_g.resize(n, tau - 1);
  side.xi_q.resize(n, tau - 1);

  for (int u = 0; u < n; ++u) {
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(u)];
    double cum = 1.0;
    for (int s = 1; s <= tau - 1; ++s) {
      const HistoryView view(tr, s);
      const double pi_star = dgp::oracle_propensity(spec, view);
      const int a_s = a_obs(u, s - 1);
      const double eta_star = a_s == 1 ? pi_star : 1.0 - pi_star;
      double eta_hat = a_s == 1 ? pn.g[static_cast<std::size_t>(s - 1)](u)
                                : 1.0 - pn.g[static_cast<std::size_t>(s - 1)](u);
      eta_hat = std::clamp(eta_hat, clip.lo, clip.hi);
      const double ind = a_s == pn.a_pol(u, s - 1) ? 1.0 : 0.0;
      cum *= ind / eta_hat;
      side.w(u, s - 1) = cum / eta_star;
      side.xi_g(u, s - 1) = eta_star - eta_hat;

      double q_star = 0.0;
      if (ind != 0.0) {
        // nested rollouts conditioned on (H_s, A_s = policy action), common
        // random numbers across policies via the (unit, step, draw) stream
        dgp::ResumeState st = dgp::reconstruct_state(spec, tr, s);
        st.a[static_cast<std::size_t>(s)] = pn.a_pol(u, s - 1);
        double acc = 0.0;
        for (int m = 0; m < n_mc; ++m) {
          Rng rng = Rng::derive(seed, (static_cast<std::uint64_t>(u) << 24) ^
                                          (static_cast<std::uint64_t>(s) << 20) ^
                                          static_cast<std::uint64_t>(m));
          acc += dgp::rollout_from(spec, st, policy, rng);
        }
        q_star = acc / n_mc;
      }
      side.xi_q(u, s - 1) = pn.q_cf[static_cast<std::size_t>(s - 1)](u) - q_star;
    }
  }
  return side;
}

}  // namespace

RemainderDiagnostic remainder_diagnostic(const dgp::DgpSpec& spec, const Dataset& eval_ds,
                                         const train::TrainedEstimator& est,
                                         const ActionMatrix& actions,
                                         const std::vector<std::pair<int, int>>& pairs,
                                         int n_mc_qstar, std::uint64_t seed,
                                         const ClipBounds& clip,
                                         const embed::KernelConfig& kcfg) {
  if (spec.effective_tau() > 4)
    throw ConfigError("remainder diagnostics require tau <= 4 for the nested outcome oracle");
  if (spec.variant == dgp::Variant::tiny)
    throw ConfigError("remainder diagnostics target the simulated variants");
  if (n_mc_qstar < 1) throw ConfigError("need at least one rollout per conditional mean");
  const int tau = eval_ds.tau;
  if (tau < 2) throw ConfigError("remainder decomposition needs tau >= 2");

  const NuisanceValues nv = net_nuisance_values(eval_ds, est, actions);

  std::vector<int> involved;
  for (const auto& pr : pairs) {
    for (int side : {pr.first, pr.second}) {
      if (side < 0 || side >= static_cast<int>(nv.policy.size()))
        throw std::out_of_range("policy index in diagnostic pair");
      if (std::find(involved.begin(), involved.end(), side) == involved.end())
        involved.push_back(side);
    }
  }

  std::vector<RemainderSide> sides(nv.policy.size());
  for (int k : involved)
    sides[static_cast<std::size_t>(k)] =
        remainder_side(spec, eval_ds, nv.policy[static_cast<std::size_t>(k)], nv.a_obs,
                       n_mc_qstar, seed, clip, est.policies[static_cast<std::size_t>(k)]);

  RemainderDiagnostic diag;
  for (const auto& pr : pairs) {
    const RemainderSide& si = sides[static_cast<std::size_t>(pr.first)];
    const RemainderSide& sj = sides[static_cast<std::size_t>(pr.second)];
    RemainderPair out;
    out.i = pr.first;
    out.j = pr.second;
    for (int s = 1; s <= tau - 1; ++s) {
      const auto wi = si.w.col(s - 1).array();
      const auto wj = sj.w.col(s - 1).array();
      const auto gi = si.xi_g.col(s - 1).array();
      const auto gj = sj.xi_g.col(s - 1).array();
      const auto qi = si.xi_q.col(s - 1).array();
      const auto qj = sj.xi_q.col(s - 1).array();
      out.term1.push_back(((wi - wj) * gi * qi).mean());
      out.term2.push_back((wj * qi * (gi - gj)).mean());
      out.term3.push_back((wj * gj * (qi - qj)).mean());
    }
    out.sum1 = std::accumulate(out.term1.begin(), out.term1.end(), 0.0);
    out.sum2 = std::accumulate(out.term2.begin(), out.term2.end(), 0.0);
    out.sum3 = std::accumulate(out.term3.begin(), out.term3.end(), 0.0);
    out.total = out.sum1 + out.sum2 + out.sum3;
    out.traj_mmd = embed::trajectory_mmd(eval_ds, pr.first, pr.second, actions, kcfg);
    diag.pairs.push_back(std::move(out));
  }
  return diag;
}

void write_diagnostics_csv(const std::string& path, const RemainderDiagnostic& diag) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "pair,t,term1,term2,term3,traj_mmd\n";
  for (const auto& p : diag.pairs) {
    for (std::size_t s = 0; s < p.term1.size(); ++s)
      out << p.i << "-" << p.j << "," << (s + 1) << "," << num(p.term1[s]) << ","
          << num(p.term2[s]) << "," << num(p.term3[s]) << "," << num(p.traj_mmd) << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace peq::target
