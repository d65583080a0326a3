#include "peq/types.hpp"

#include <cmath>
#include <sstream>

namespace peq {

Dataset make_dataset(std::vector<Trajectory> trajectories, int tau, int d_l) {
  Dataset ds;
  if (trajectories.empty()) {
    ds.tau = tau < 0 ? 0 : tau;
    ds.d_l = d_l < 0 ? 0 : d_l;
    return ds;
  }
  if (tau < 0) tau = static_cast<int>(trajectories[0].covariates.rows());
  if (d_l < 0) d_l = static_cast<int>(trajectories[0].covariates.cols());

  double lo = trajectories[0].outcome, hi = trajectories[0].outcome;
  for (const auto& tr : trajectories) {
    if (tr.covariates.rows() != tau || tr.covariates.cols() != d_l) {
      std::ostringstream msg;
      msg << "trajectory '" << tr.id << "': covariate shape " << tr.covariates.rows()
          << "x" << tr.covariates.cols() << ", expected " << tau << "x" << d_l;
      throw ShapeError(msg.str());
    }
    if (static_cast<int>(tr.actions.size()) != tau) {
      throw ShapeError("trajectory '" + tr.id + "': action count " +
                       std::to_string(tr.actions.size()) + ", expected " +
                       std::to_string(tau));
    }
    for (int a : tr.actions) {
      if (a != 0 && a != 1)
        throw ShapeError("trajectory '" + tr.id + "': non-binary action " +
                         std::to_string(a));
    }
    if (!std::isfinite(tr.outcome))
      throw ShapeError("trajectory '" + tr.id + "': non-finite outcome");
    lo = std::min(lo, tr.outcome);
    hi = std::max(hi, tr.outcome);
  }
  ds.trajectories = std::move(trajectories);
  ds.tau = tau;
  ds.d_l = d_l;
  ds.outcome_bounds = {lo, hi};
  return ds;
}

HistoryView::HistoryView(const Trajectory& traj, int t) : traj_(&traj), t_(t) {
  const int tau = static_cast<int>(traj.covariates.rows());
  if (t < 1 || t > tau)
    throw MaskedAccessError("history index t=" + std::to_string(t) +
                            " outside 1.." + std::to_string(tau));
}

Eigen::VectorXd HistoryView::covariate(int s) const {
  if (s < 1 || s > t_)
    throw MaskedAccessError("covariate L_" + std::to_string(s) +
                            " is outside the history window at t=" + std::to_string(t_));
  return traj_->covariates.row(s - 1).transpose();
}

int HistoryView::action(int s) const {
  if (s < 1 || s > t_ - 1)
    throw MaskedAccessError("action A_" + std::to_string(s) +
                            " is outside the history window at t=" + std::to_string(t_));
  return traj_->actions[static_cast<std::size_t>(s - 1)];
}

Eigen::VectorXd HistoryView::flattened() const {
  const int cols = d_l();
  Eigen::VectorXd out(t_ * cols + (t_ - 1));
  for (int s = 1; s <= t_; ++s)
    out.segment((s - 1) * cols, cols) = traj_->covariates.row(s - 1).transpose();
  for (int s = 1; s <= t_ - 1; ++s)
    out(t_ * cols + s - 1) = static_cast<double>(traj_->actions[static_cast<std::size_t>(s - 1)]);
  return out;
}

Policy Policy::threshold(std::string label, std::vector<double> gammas) {
  if (gammas.empty()) throw std::invalid_argument("threshold policy needs a gamma schedule");
  for (double g : gammas)
    if (!(g >= 0.0 && g <= 1.0))
      throw std::invalid_argument("threshold gamma " + std::to_string(g) + " outside [0,1]");
  Policy p;
  p.kind = PolicyKind::threshold;
  p.label = std::move(label);
  p.thresholds = std::move(gammas);
  return p;
}

Policy Policy::constant_threshold(std::string label, double gamma, int tau) {
  return threshold(std::move(label), std::vector<double>(static_cast<std::size_t>(tau), gamma));
}

Policy Policy::fixed(std::string label, std::vector<int> seq) {
  if (seq.empty()) throw std::invalid_argument("fixed policy needs a sequence");
  for (int a : seq)
    if (a != 0 && a != 1)
      throw std::invalid_argument("fixed policy action " + std::to_string(a) + " not in {0,1}");
  Policy p;
  p.kind = PolicyKind::fixed_sequence;
  p.label = std::move(label);
  p.sequence = std::move(seq);
  return p;
}

Policy Policy::behavior(std::string label) {
  Policy p;
  p.kind = PolicyKind::behavior_stochastic;
  p.label = std::move(label);
  return p;
}

}  // namespace peq
