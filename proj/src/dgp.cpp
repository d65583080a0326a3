#include "peq/dgp.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace peq::dgp {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// alternating lag coefficients w_i = (-1)^i / i
double lag_weight(int i) { return ((i % 2) ? -1.0 : 1.0) / static_cast<double>(i); }

using ActionFn = std::function<int(int, double, Rng&)>;

ActionFn behavior_fn(const DgpSpec& spec) {
  return [&spec](int, double s, Rng& rng) {
    return sigmoid(s + rng.normal(spec.noise_sd_a)) > 0.5 ? 1 : 0;
  };
}

ActionFn policy_fn(const DgpSpec& spec, const Policy& p) {
  const int tau = spec.effective_tau();
  switch (p.kind) {
    case PolicyKind::threshold:
      if (spec.variant == Variant::tiny)
        throw std::invalid_argument("threshold policies are undefined for the tiny variant");
      if (static_cast<int>(p.thresholds.size()) != tau)
        throw ShapeError("policy '" + p.label + "': gamma schedule length " +
                         std::to_string(p.thresholds.size()) + ", expected " +
                         std::to_string(tau));
      return [&p](int t, double s, Rng&) {
        return sigmoid(s) > p.thresholds[static_cast<std::size_t>(t - 1)] ? 1 : 0;
      };
    case PolicyKind::fixed_sequence:
      if (static_cast<int>(p.sequence.size()) != tau)
        throw ShapeError("policy '" + p.label + "': sequence length " +
                         std::to_string(p.sequence.size()) + ", expected " +
                         std::to_string(tau));
      return [&p](int t, double, Rng&) { return p.sequence[static_cast<std::size_t>(t - 1)]; };
    case PolicyKind::behavior_stochastic:
    default:
      throw std::invalid_argument("policy '" + p.label + "' is stochastic; a deterministic policy is required");
  }
}

// Running generator state for the limited/expanded variants. Arrays are
// indexed by absolute time step (index 0 unused except y[0] = 0).
struct Walk {
  const DgpSpec* spec = nullptr;
  bool expanded = false;
  int tau = 0, dx = 0, dz = 0;
  Eigen::VectorXd x, z;
  std::vector<double> xbar, m1, m2, y;
  std::vector<int> a;
  double ell = 0.0;
  Eigen::MatrixXd rows;  // tau x (dx [+dz] + 1)

  void reset(const DgpSpec& s) {
    spec = &s;
    expanded = s.variant == Variant::expanded;
    tau = s.tau;
    dx = s.d_x;
    dz = expanded ? s.d_z : 0;
    x.resize(dx);
    z.resize(dz);
    xbar.assign(static_cast<std::size_t>(tau) + 1, 0.0);
    m1.assign(static_cast<std::size_t>(tau) + 1, 0.0);
    m2.assign(static_cast<std::size_t>(tau) + 1, 0.0);
    y.assign(static_cast<std::size_t>(tau) + 1, 0.0);
    a.assign(static_cast<std::size_t>(tau) + 1, 0);
    ell = 0.5 * tau - 3.0;
    rows.setZero(tau, dx + dz + 1);
  }

  double score(int t) const {
    double s = 0.0;
    const int reach = std::min(spec->lag, t - 1);
    for (int i = 1; i <= reach; ++i)
      s += lag_weight(i) * (xbar[static_cast<std::size_t>(t - i)] +
                            std::tanh(y[static_cast<std::size_t>(t - i)] / 2.0));
    return s - std::tanh(ell - 0.5 * tau);
  }

  void step(int t, Rng& rng, const ActionFn& act) {
    if (t == 1) {
      for (int j = 0; j < dx; ++j) x(j) = spec->x_scale * rng.normal();
      for (int j = 0; j < dz; ++j) z(j) = spec->x_scale * rng.normal();
    } else {
      if (expanded) {
        const double xbase = x.mean();  // still X_{t-1}
        Eigen::VectorXd znew(dz);
        for (int j = 0; j < dz; ++j)
          znew(j) = spec->omega[0] * z(j) +
                    spec->omega[1] * a[static_cast<std::size_t>(t - 1)] * sigmoid(z(j) * z(j)) +
                    spec->omega[2] * xbase + spec->x_scale * rng.normal(spec->noise_sd_z);
        z = znew;
      }
      for (int j = 0; j < dx; ++j) x(j) = 0.8 * x(j) + 0.6 * spec->x_scale * rng.normal();
    }
    rows.block(t - 1, 0, 1, dx) = x.transpose();
    if (dz > 0) rows.block(t - 1, dx, 1, dz) = z.transpose();
    rows(t - 1, dx + dz) = y[static_cast<std::size_t>(t - 1)];

    const int half = dx / 2;
    double s_aug = x.sum() + (dz > 0 ? z.sum() : 0.0);
    xbar[static_cast<std::size_t>(t)] = s_aug / static_cast<double>(dx + dz);
    m1[static_cast<std::size_t>(t)] = x.head(half).mean();
    m2[static_cast<std::size_t>(t)] = x.tail(dx - half).mean();

    a[static_cast<std::size_t>(t)] = act(t, score(t), rng);

    double acc = 0.0;
    const int reach = std::min(spec->lag, t - 1);
    for (int i = 1; i <= reach; ++i) {
      const std::size_t u = static_cast<std::size_t>(t - i);
      acc += lag_weight(i) * std::tanh(std::sin(m1[u] * a[u]) + std::cos(m2[u] * a[u]));
    }
    y[static_cast<std::size_t>(t)] = 5.0 * acc + rng.normal(spec->noise_sd_y);
    ell += 2.0 * (a[static_cast<std::size_t>(t)] - 1) * xbar[static_cast<std::size_t>(t)] *
           std::tanh(y[static_cast<std::size_t>(t)]);
  }

  Trajectory finish(std::string id) const {
    Trajectory tr;
    tr.id = std::move(id);
    tr.covariates = rows;
    tr.actions.assign(a.begin() + 1, a.end());
    tr.outcome = y[static_cast<std::size_t>(tau)];
    return tr;
  }
};

Dataset simulate_walk(const DgpSpec& spec, int n, const ActionFn& act) {
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(n));
  Walk w;
  for (int idx = 0; idx < n; ++idx) {
    Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(idx));
    w.reset(spec);
    for (int t = 1; t <= spec.tau; ++t) w.step(t, rng, act);
    trajs.push_back(w.finish(std::to_string(idx)));
  }
  return make_dataset(std::move(trajs), spec.tau, spec.d_l());
}

// The behavior score recomputed from a history window, using only masked
// accessors so the information-set discipline is enforced structurally.
double score_from_view(const DgpSpec& spec, const HistoryView& h) {
  const int t = h.t();
  const int d_aug = spec.d_l() - 1;
  std::vector<double> xbar(static_cast<std::size_t>(t), 0.0);
  std::vector<double> y(static_cast<std::size_t>(t), 0.0);
  y[0] = h.covariate(1)(d_aug);  // Y_0, stored in L_1
  for (int u = 1; u <= t - 1; ++u) {
    const Eigen::VectorXd L = h.covariate(u);
    xbar[static_cast<std::size_t>(u)] = L.head(d_aug).mean();
    y[static_cast<std::size_t>(u)] = h.covariate(u + 1)(d_aug);
  }
  double ell = 0.5 * spec.tau - 3.0;
  for (int u = 1; u <= t - 1; ++u)
    ell += 2.0 * (h.action(u) - 1) * xbar[static_cast<std::size_t>(u)] *
           std::tanh(y[static_cast<std::size_t>(u)]);
  double s = 0.0;
  const int reach = std::min(spec.lag, t - 1);
  for (int i = 1; i <= reach; ++i)
    s += lag_weight(i) * (xbar[static_cast<std::size_t>(t - i)] +
                          std::tanh(y[static_cast<std::size_t>(t - i)] / 2.0));
  return s - std::tanh(ell - 0.5 * spec.tau);
}

}  // namespace

int DgpSpec::d_l() const {
  switch (variant) {
    case Variant::limited: return d_x + 1;
    case Variant::expanded: return d_x + d_z + 1;
    case Variant::tiny: return 1;
  }
  return 0;
}

void validate(const DgpSpec& spec) {
  if (spec.variant != Variant::tiny && spec.tau < 2)
    throw ConfigError("tau must be at least 2");
  if (spec.d_x < 2) throw ConfigError("d_x must be at least 2");
  if (spec.variant == Variant::expanded && spec.d_z < 1)
    throw ConfigError("d_z must be positive for the expanded variant");
  if (spec.lag < 1) throw ConfigError("lag must be positive");
  if (spec.noise_sd_a < 0 || spec.noise_sd_y < 0 || spec.noise_sd_z < 0)
    throw ConfigError("noise standard deviations must be nonnegative");
  if (spec.x_scale < 0) throw ConfigError("x_scale must be nonnegative");
}

Dataset simulate_limited(const DgpSpec& spec, int n) {
  if (spec.variant != Variant::limited)
    throw std::invalid_argument("simulate_limited requires the limited variant");
  validate(spec);
  return simulate_walk(spec, n, behavior_fn(spec));
}

Dataset simulate_expanded(const DgpSpec& spec, int n) {
  if (spec.variant != Variant::expanded)
    throw std::invalid_argument("simulate_expanded requires the expanded variant");
  validate(spec);
  return simulate_walk(spec, n, behavior_fn(spec));
}

Dataset simulate_tiny(const DgpSpec& spec, int n) {
  if (spec.variant != Variant::tiny)
    throw std::invalid_argument("simulate_tiny requires the tiny variant");
  validate(spec);
  const TinyTables& tb = spec.tiny;
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(n));
  for (int idx = 0; idx < n; ++idx) {
    Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(idx));
    const int l1 = rng.bernoulli(tb.p_l1) ? 1 : 0;
    const int a1 = rng.bernoulli(tb.p_a1[l1]) ? 1 : 0;
    const int l2 = rng.bernoulli(tb.p_l2[l1][a1]) ? 1 : 0;
    const int a2 = rng.bernoulli(tb.p_a2[l1][a1][l2]) ? 1 : 0;
    const int yv = rng.bernoulli(tb.mu_y[l1][a1][l2][a2]) ? 1 : 0;
    Trajectory tr;
    tr.id = std::to_string(idx);
    tr.covariates.resize(2, 1);
    tr.covariates(0, 0) = l1;
    tr.covariates(1, 0) = l2;
    tr.actions = {a1, a2};
    tr.outcome = yv;
    trajs.push_back(std::move(tr));
  }
  return make_dataset(std::move(trajs), 2, 1);
}

Dataset simulate(const DgpSpec& spec, int n) {
  switch (spec.variant) {
    case Variant::limited: return simulate_limited(spec, n);
    case Variant::expanded: return simulate_expanded(spec, n);
    case Variant::tiny: return simulate_tiny(spec, n);
  }
  throw std::invalid_argument("unknown variant");
}

double behavior_score(const DgpSpec& spec, const Trajectory& traj, int t) {
  if (spec.variant == Variant::tiny)
    throw std::invalid_argument("the tiny variant has no score; use the propensity tables");
  return score_from_view(spec, HistoryView(traj, t));
}

double oracle_propensity(const DgpSpec& spec, const HistoryView& h) {
  if (spec.variant == Variant::tiny) {
    const TinyTables& tb = spec.tiny;
    const int l1 = static_cast<int>(h.covariate(1)(0));
    if (h.t() == 1) return tb.p_a1[l1];
    const int a1 = h.action(1);
    const int l2 = static_cast<int>(h.covariate(2)(0));
    return tb.p_a2[l1][a1][l2];
  }
  return phi_cdf(score_from_view(spec, h) / spec.noise_sd_a);
}

int policy_action(const Policy& p, const DgpSpec& spec, const Trajectory& traj, int t) {
  switch (p.kind) {
    case PolicyKind::fixed_sequence:
      if (static_cast<int>(p.sequence.size()) != spec.effective_tau())
        throw ShapeError("policy '" + p.label + "': sequence length mismatch");
      return p.sequence[static_cast<std::size_t>(t - 1)];
    case PolicyKind::threshold: {
      if (static_cast<int>(p.thresholds.size()) != spec.effective_tau())
        throw ShapeError("policy '" + p.label + "': gamma schedule length mismatch");
      const double s = behavior_score(spec, traj, t);
      return sigmoid(s) > p.thresholds[static_cast<std::size_t>(t - 1)] ? 1 : 0;
    }
    case PolicyKind::behavior_stochastic:
    default:
      throw std::invalid_argument("policy '" + p.label + "' is stochastic");
  }
}

double rollout_final_outcome(const DgpSpec& spec, const Policy& p, Rng& rng) {
  const ActionFn act = policy_fn(spec, p);
  Walk w;
  w.reset(spec);
  for (int t = 1; t <= spec.tau; ++t) w.step(t, rng, act);
  return w.y[static_cast<std::size_t>(spec.tau)];
}

double tiny_rollout_outcome(const DgpSpec& spec, const Policy& p, Rng& rng) {
  if (p.kind != PolicyKind::fixed_sequence)
    throw std::invalid_argument("tiny rollouts support fixed sequences only");
  const TinyTables& tb = spec.tiny;
  const int a1 = p.sequence[0], a2 = p.sequence[1];
  const int l1 = rng.bernoulli(tb.p_l1) ? 1 : 0;
  const int l2 = rng.bernoulli(tb.p_l2[l1][a1]) ? 1 : 0;
  return rng.bernoulli(tb.mu_y[l1][a1][l2][a2]) ? 1.0 : 0.0;
}

namespace {

struct Welford {
  double mean = 0.0, m2 = 0.0;
  std::int64_t count = 0;
  void add(double v) {
    ++count;
    const double d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean);
  }
  double std_error() const {
    if (count < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
  }
};

}  // namespace

double tiny_exhaustive_capo(const DgpSpec& spec, const Policy& p) {
  if (p.kind != PolicyKind::fixed_sequence)
    throw std::invalid_argument("tiny exhaustive oracle supports fixed sequences only");
  if (p.sequence.size() != 2) throw ShapeError("tiny policies have two steps");
  const TinyTables& tb = spec.tiny;
  const int a1 = p.sequence[0], a2 = p.sequence[1];
  double psi = 0.0;
  for (int l1 = 0; l1 <= 1; ++l1) {
    const double pl1 = l1 ? tb.p_l1 : 1.0 - tb.p_l1;
    for (int l2 = 0; l2 <= 1; ++l2) {
      const double pl2 = l2 ? tb.p_l2[l1][a1] : 1.0 - tb.p_l2[l1][a1];
      psi += pl1 * pl2 * tb.mu_y[l1][a1][l2][a2];
    }
  }
  return psi;
}

OracleResult oracle_capo(const DgpSpec& spec, const Policy& p, std::int64_t n_mc,
                         std::uint64_t seed) {
  validate(spec);
  if (spec.variant == Variant::tiny) {
    OracleResult r;
    r.value = tiny_exhaustive_capo(spec, p);
    r.exhaustive = true;
    return r;
  }
  Welford acc;
  for (std::int64_t i = 0; i < n_mc; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    acc.add(rollout_final_outcome(spec, p, rng));
  }
  OracleResult r;
  r.value = acc.mean;
  r.mc_std_error = acc.std_error();
  r.n_mc = n_mc;
  return r;
}

OracleResult oracle_cate(const DgpSpec& spec, const Policy& p_i, const Policy& p_j,
                         std::int64_t n_mc, std::uint64_t seed) {
  validate(spec);
  if (spec.variant == Variant::tiny) {
    OracleResult r;
    r.value = tiny_exhaustive_capo(spec, p_i) - tiny_exhaustive_capo(spec, p_j);
    r.exhaustive = true;
    return r;
  }
  Welford acc;
  for (std::int64_t i = 0; i < n_mc; ++i) {
    Rng rng_i = Rng::derive(seed, static_cast<std::uint64_t>(i));
    Rng rng_j = Rng::derive(seed, static_cast<std::uint64_t>(i));
    acc.add(rollout_final_outcome(spec, p_i, rng_i) -
            rollout_final_outcome(spec, p_j, rng_j));
  }
  OracleResult r;
  r.value = acc.mean;
  r.mc_std_error = acc.std_error();
  r.n_mc = n_mc;
  return r;
}

ResumeState reconstruct_state(const DgpSpec& spec, const Trajectory& traj, int s) {
  if (spec.variant == Variant::tiny)
    throw std::invalid_argument("resume rollouts are for the limited/expanded variants");
  if (s < 1 || s > spec.tau) throw std::out_of_range("resume step outside 1..tau");
  const int d_aug = spec.d_l() - 1;
  ResumeState st;
  st.s = s;
  st.x = traj.covariates.topLeftCorner(s, d_aug);
  st.y.assign(static_cast<std::size_t>(s), 0.0);
  for (int u = 1; u <= s - 1; ++u) st.y[static_cast<std::size_t>(u)] = traj.covariates(u, d_aug);
  st.a.assign(static_cast<std::size_t>(s) + 1, 0);
  for (int u = 1; u <= s; ++u) st.a[static_cast<std::size_t>(u)] = traj.actions[static_cast<std::size_t>(u - 1)];
  st.ell = 0.5 * spec.tau - 3.0;
  for (int u = 1; u <= s - 1; ++u) {
    const double xbar_u = st.x.row(u - 1).mean();
    st.ell += 2.0 * (st.a[static_cast<std::size_t>(u)] - 1) * xbar_u *
              std::tanh(st.y[static_cast<std::size_t>(u)]);
  }
  return st;
}

double rollout_from(const DgpSpec& spec, const ResumeState& st, const Policy& p, Rng& rng) {
  const ActionFn act = policy_fn(spec, p);
  const int s = st.s;
  const int dx = spec.d_x;
  const int dz = spec.variant == Variant::expanded ? spec.d_z : 0;
  const int half = dx / 2;

  Walk w;
  w.reset(spec);
  for (int u = 1; u <= s; ++u) {
    const Eigen::VectorXd row = st.x.row(u - 1).transpose();
    w.xbar[static_cast<std::size_t>(u)] = row.mean();
    w.m1[static_cast<std::size_t>(u)] = row.head(half).mean();
    w.m2[static_cast<std::size_t>(u)] = row.segment(half, dx - half).mean();
    if (u < s) w.y[static_cast<std::size_t>(u)] = st.y[static_cast<std::size_t>(u)];
    w.a[static_cast<std::size_t>(u)] = st.a[static_cast<std::size_t>(u)];
  }
  w.x = st.x.row(s - 1).head(dx).transpose();
  if (dz > 0) w.z = st.x.row(s - 1).segment(dx, dz).transpose();

  // Y_s is not part of (H_s, A_s): redraw it, then update the adherence state
  double acc = 0.0;
  const int reach = std::min(spec.lag, s - 1);
  for (int i = 1; i <= reach; ++i) {
    const std::size_t u = static_cast<std::size_t>(s - i);
    acc += lag_weight(i) * std::tanh(std::sin(w.m1[u] * w.a[u]) + std::cos(w.m2[u] * w.a[u]));
  }
  w.y[static_cast<std::size_t>(s)] = 5.0 * acc + rng.normal(spec.noise_sd_y);
  w.ell = st.ell + 2.0 * (w.a[static_cast<std::size_t>(s)] - 1) *
                        w.xbar[static_cast<std::size_t>(s)] *
                        std::tanh(w.y[static_cast<std::size_t>(s)]);

  for (int t = s + 1; t <= spec.tau; ++t) w.step(t, rng, act);
  return w.y[static_cast<std::size_t>(spec.tau)];
}

}  // namespace peq::dgp

namespace peq {

Eigen::MatrixXi apply_policy(const Policy& p, const Dataset& ds, const dgp::DgpSpec* spec) {
  const int n = ds.n(), tau = ds.tau;
  Eigen::MatrixXi out(n, tau);
  switch (p.kind) {
    case PolicyKind::fixed_sequence: {
      if (static_cast<int>(p.sequence.size()) != tau)
        throw ShapeError("policy '" + p.label + "': sequence length " +
                         std::to_string(p.sequence.size()) + ", expected " + std::to_string(tau));
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < tau; ++t) out(i, t) = p.sequence[static_cast<std::size_t>(t)];
      return out;
    }
    case PolicyKind::threshold: {
      if (spec == nullptr)
        throw ConfigError("policy '" + p.label +
                          "' is threshold-based and needs the generator spec for its score");
      if (static_cast<int>(p.thresholds.size()) != tau)
        throw ShapeError("policy '" + p.label + "': gamma schedule length " +
                         std::to_string(p.thresholds.size()) + ", expected " + std::to_string(tau));
      for (int i = 0; i < n; ++i)
        for (int t = 1; t <= tau; ++t)
          out(i, t - 1) = dgp::policy_action(p, *spec, ds.trajectories[static_cast<std::size_t>(i)], t);
      return out;
    }
    case PolicyKind::behavior_stochastic:
    default:
      throw std::invalid_argument("policy '" + p.label +
                                  "' is stochastic; apply_policy needs a deterministic rule");
  }
}

ActionMatrix apply_policies(const std::vector<Policy>& ps, const Dataset& ds,
                            const dgp::DgpSpec* spec) {
  ActionMatrix m;
  m.policy_actions.reserve(ps.size());
  for (const auto& p : ps) m.policy_actions.push_back(apply_policy(p, ds, spec));
  return m;
}

}  // namespace peq
