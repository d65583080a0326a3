#include "peq/embed.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "peq/rng.hpp"

namespace peq::embed {

namespace {

// pairwise squared distances between rows, clamped against rounding
Eigen::MatrixXd row_sqdist(const Eigen::MatrixXd& f) {
  const Eigen::VectorXd sq = f.rowwise().squaredNorm();
  Eigen::MatrixXd s = -2.0 * (f * f.transpose());
  s.colwise() += sq;
  s.rowwise() += sq.transpose();
  return s.cwiseMax(0.0);
}

// mean of exp(-gamma * (S + (a_i - a_j)^2)) over all index pairs
double gram_mean(const Eigen::MatrixXd& s, const Eigen::VectorXd& a_i,
                 const Eigen::VectorXd& a_j, double gamma) {
  const Eigen::Index n = s.rows();
  Eigen::MatrixXd d = a_i.replicate(1, n);
  d.rowwise() -= a_j.transpose();
  return (((s + d.cwiseProduct(d)) * -gamma).array().exp()).mean();
}

Eigen::MatrixXd pooled_points(const Eigen::MatrixXd& f,
                              const std::vector<Eigen::VectorXd>& action_cols) {
  const Eigen::Index n = f.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(action_cols.size());
  Eigen::MatrixXd p(k * n, f.cols() + 1);
  for (Eigen::Index c = 0; c < k; ++c) {
    p.block(c * n, 0, n, f.cols()) = f;
    p.block(c * n, f.cols(), n, 1) = action_cols[static_cast<std::size_t>(c)];
  }
  return p;
}

std::vector<Eigen::VectorXd> action_columns(const ActionMatrix& actions, int t) {
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(actions.policy_actions.size());
  for (const auto& m : actions.policy_actions)
    cols.push_back(m.col(t - 1).cast<double>());
  return cols;
}

double step_gamma(const Dataset& ds, const KernelConfig& cfg, int t,
                  const Eigen::MatrixXd& features,
                  const std::vector<Eigen::VectorXd>& action_cols) {
  if (static_cast<int>(cfg.gamma_t.size()) == ds.tau)
    return cfg.gamma_t[static_cast<std::size_t>(t - 1)];
  if (!cfg.gamma_t.empty())
    throw ShapeError("gamma_t must be empty or have one entry per step");
  return median_bandwidth(pooled_points(features, action_cols), cfg);
}

}  // namespace

Eigen::MatrixXd history_features(const Dataset& ds, int t) {
  if (t < 1 || t > ds.tau) throw std::out_of_range("history step outside 1..tau");
  const int n = ds.n(), d_l = ds.d_l;
  Eigen::MatrixXd f(n, t * d_l + (t - 1));
  for (int i = 0; i < n; ++i) {
    const Trajectory& tr = ds.trajectories[static_cast<std::size_t>(i)];
    for (int s = 1; s <= t; ++s)
      f.block(i, (s - 1) * d_l, 1, d_l) = tr.covariates.row(s - 1);
    for (int s = 1; s <= t - 1; ++s)
      f(i, t * d_l + s - 1) = static_cast<double>(tr.actions[static_cast<std::size_t>(s - 1)]);
  }
  return f;
}

double median_bandwidth(const Eigen::MatrixXd& points, const KernelConfig& cfg) {
  const Eigen::Index m = points.rows();
  if (m < 2) throw std::invalid_argument("median heuristic needs at least two points");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const Eigen::Index keep = std::min<Eigen::Index>(m, cfg.heuristic_sample);
  if (keep < m) {
    Rng rng(cfg.heuristic_seed);
    for (Eigen::Index i = 0; i < keep; ++i) {
      const Eigen::Index j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(keep));
  }

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(keep * (keep - 1) / 2));
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dists.push_back((points.row(idx[a]) - points.row(idx[b])).norm());
  if (dists.empty()) return 1.0;

  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  const double median = dists[mid];
  if (median <= 0.0) return 1.0;
  return cfg.gamma_multiplier / (2.0 * median);
}

double mmd(const Eigen::MatrixXd& z_i, const Eigen::MatrixXd& z_j, double gamma) {
  if (z_i.cols() != z_j.cols())
    throw ShapeError("mmd point sets must share a dimension");
  if (z_i.rows() == 0 || z_j.rows() == 0)
    throw std::invalid_argument("mmd needs nonempty point sets");
  auto kernel_mean = [gamma](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd s = -2.0 * (a * b.transpose());
    s.colwise() += a.rowwise().squaredNorm();
    s.rowwise() += b.rowwise().squaredNorm().transpose();
    return ((s.cwiseMax(0.0)) * -gamma).array().exp().mean();
  };
  const double v = kernel_mean(z_i, z_i) + kernel_mean(z_j, z_j) - 2.0 * kernel_mean(z_i, z_j);
  return std::sqrt(std::max(0.0, v));
}

DistanceMatrices distance_matrices(const Dataset& ds, const ActionMatrix& actions,
                                   KernelConfig cfg) {
  const int k = actions.n_policies();
  if (k < 2) throw std::invalid_argument("distance matrices need at least two policies");
  if (actions.n() != ds.n() || actions.tau() != ds.tau)
    throw ShapeError("action matrix shape does not match the dataset");

  DistanceMatrices out;
  out.d_t.reserve(static_cast<std::size_t>(ds.tau));
  for (int t = 1; t <= ds.tau; ++t) {
    const Eigen::MatrixXd f = history_features(ds, t);
    const Eigen::MatrixXd s = row_sqdist(f);
    const std::vector<Eigen::VectorXd> cols = action_columns(actions, t);
    const double gamma = step_gamma(ds, cfg, t, f, cols);

    std::vector<double> self(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a)
      self[static_cast<std::size_t>(a)] =
          gram_mean(s, cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(a)], gamma);

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        const double cross =
            gram_mean(s, cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)], gamma);
        const double v = self[static_cast<std::size_t>(a)] + self[static_cast<std::size_t>(b)] -
                         2.0 * cross;
        d(a, b) = d(b, a) = std::sqrt(std::max(0.0, v));
      }

    const double scale = d.maxCoeff();
    if (scale > 0.0) d /= scale;
    out.d_t.push_back(std::move(d));
    out.scale_t.push_back(scale);
    out.gamma_t.push_back(gamma);
  }
  return out;
}

PolicyEmbedding embed_policies(const Dataset& ds, const ActionMatrix& actions,
                               KernelConfig cfg, int dim) {
  const int k = actions.n_policies();
  if (k < 1) throw std::invalid_argument("no policies to embed");
  PolicyEmbedding emb;
  emb.dim = dim;
  if (k == 1) {
    // nothing to scale against: zero rows by convention
    for (int t = 0; t < ds.tau; ++t) {
      emb.rho_t.push_back(Eigen::MatrixXd::Zero(1, dim));
      emb.stress_t.push_back(0.0);
    }
    return emb;
  }

  const DistanceMatrices dm = distance_matrices(ds, actions, std::move(cfg));
  for (int t = 0; t < ds.tau; ++t) {
    const Eigen::MatrixXd& d = dm.d_t[static_cast<std::size_t>(t)];
    SmacofResult res = smacof_mds(d, dim, 300, 1e-9, mix64(static_cast<std::uint64_t>(t)));

    // exact-duplicate collapse: zero distance forces identical rows
    std::vector<int> root(static_cast<std::size_t>(k));
    std::iota(root.begin(), root.end(), 0);
    std::function<int(int)> find = [&](int v) {
      while (root[static_cast<std::size_t>(v)] != v) v = root[static_cast<std::size_t>(v)];
      return v;
    };
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b)
        if (d(a, b) == 0.0) root[static_cast<std::size_t>(find(b))] = find(a);
    for (int a = 0; a < k; ++a) res.x.row(a) = res.x.row(find(a));

    double stress = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        const double gap = d(a, b) - (res.x.row(a) - res.x.row(b)).norm();
        stress += gap * gap;
      }
    emb.rho_t.push_back(std::move(res.x));
    emb.stress_t.push_back(stress);
  }
  return emb;
}

PolicyEmbedding deterministic_bypass(const std::vector<Policy>& ps, int tau) {
  if (ps.empty()) throw std::invalid_argument("no policies to embed");
  for (const auto& p : ps)
    if (p.kind != PolicyKind::fixed_sequence)
      throw std::invalid_argument("deterministic bypass requires fixed-sequence policies");
  PolicyEmbedding emb;
  emb.dim = 1;
  for (int t = 1; t <= tau; ++t) {
    Eigen::MatrixXd rho(static_cast<Eigen::Index>(ps.size()), 1);
    for (std::size_t k = 0; k < ps.size(); ++k)
      rho(static_cast<Eigen::Index>(k), 0) = ps[k].sequence[static_cast<std::size_t>(t - 1)];
    emb.rho_t.push_back(std::move(rho));
    emb.stress_t.push_back(0.0);
  }
  return emb;
}

double trajectory_mmd(const Dataset& ds, int i, int j, const ActionMatrix& actions,
                      KernelConfig cfg) {
  const int k = actions.n_policies();
  if (i < 0 || j < 0 || i >= k || j >= k) throw std::out_of_range("policy index");
  const int n = ds.n();
  Eigen::MatrixXd e_ii = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd e_jj = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd e_ij = Eigen::MatrixXd::Zero(n, n);

  for (int t = 1; t <= ds.tau; ++t) {
    const Eigen::MatrixXd f = history_features(ds, t);
    const Eigen::MatrixXd s = row_sqdist(f);
    const Eigen::VectorXd a_i = actions.policy_actions[static_cast<std::size_t>(i)].col(t - 1).cast<double>();
    const Eigen::VectorXd a_j = actions.policy_actions[static_cast<std::size_t>(j)].col(t - 1).cast<double>();
    double gamma;
    if (static_cast<int>(cfg.gamma_t.size()) == ds.tau) {
      gamma = cfg.gamma_t[static_cast<std::size_t>(t - 1)];
    } else {
      gamma = median_bandwidth(pooled_points(f, {a_i, a_j}), cfg);
    }
    auto accumulate = [&](Eigen::MatrixXd& acc, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
      Eigen::MatrixXd d = u.replicate(1, n);
      d.rowwise() -= v.transpose();
      acc += gamma * (s + d.cwiseProduct(d));
    };
    accumulate(e_ii, a_i, a_i);
    accumulate(e_jj, a_j, a_j);
    accumulate(e_ij, a_i, a_j);
  }
  const double m_ii = (-e_ii).array().exp().mean();
  const double m_jj = (-e_jj).array().exp().mean();
  const double m_ij = (-e_ij).array().exp().mean();
  return std::sqrt(std::max(0.0, m_ii + m_jj - 2.0 * m_ij));
}

}  // namespace peq::embed
