#include "peq/embed.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "peq/rng.hpp"

namespace peq::embed {

namespace {

double stress_of(const Eigen::MatrixXd& d, const Eigen::MatrixXd& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      const double gap = d(i, j) - (x.row(i) - x.row(j)).norm();
      s += gap * gap;
    }
  return s;
}

Eigen::MatrixXd classical_init(const Eigen::MatrixXd& d, int dim, std::uint64_t seed) {
  const Eigen::Index k = d.rows();
  const Eigen::MatrixXd j =
      Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
  const Eigen::MatrixXd b = -0.5 * j * d.array().square().matrix() * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k, dim);
  int placed = 0;
  for (Eigen::Index r = k - 1; r >= 0 && placed < dim; --r) {
    const double ev = es.eigenvalues()(r);
    if (ev <= 1e-12) break;
    x.col(placed++) = es.eigenvectors().col(r) * std::sqrt(ev);
  }
  if (placed == 0 && d.maxCoeff() > 0.0) {
    // degenerate double centering: fall back to a small random spread
    Rng rng(seed);
    for (Eigen::Index i = 0; i < k; ++i)
      for (int c = 0; c < dim; ++c) x(i, c) = rng.normal(1e-3);
  }
  return x;
}

}  // namespace

SmacofResult smacof_mds(const Eigen::MatrixXd& d, int dim, int max_iter, double tol,
                        std::uint64_t seed) {
  const Eigen::Index k = d.rows();
  if (d.cols() != k) throw ShapeError("dissimilarity matrix must be square");
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(d(i, i)) > 1e-12)
      throw std::invalid_argument("dissimilarity matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < k; ++j) {
      if (d(i, j) < 0.0) throw std::invalid_argument("dissimilarities must be nonnegative");
      if (std::abs(d(i, j) - d(j, i)) > 1e-12)
        throw std::invalid_argument("dissimilarity matrix must be symmetric");
    }
  }

  SmacofResult res;
  if (k == 1) {
    res.x = Eigen::MatrixXd::Zero(1, dim);
    res.stress = 0.0;
    res.stress_history = {0.0};
    return res;
  }

  Eigen::MatrixXd x = classical_init(d, dim, seed);
  double stress = stress_of(d, x);
  res.stress_history.push_back(stress);

  for (int iter = 0; iter < max_iter; ++iter) {
    // Guttman transform with the zero-distance convention b_ij = 0
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        if (i == j) continue;
        const double dist = (x.row(i) - x.row(j)).norm();
        if (dist > 1e-15) b(i, j) = -d(i, j) / dist;
      }
    for (Eigen::Index i = 0; i < k; ++i) b(i, i) = -b.row(i).sum();

    Eigen::MatrixXd x_next = (b * x) / static_cast<double>(k);
    const double next = stress_of(d, x_next);
    if (next > stress) break;  // numerical plateau, keep the last monotone iterate
    x = std::move(x_next);
    const double drop = stress - next;
    stress = next;
    res.stress_history.push_back(stress);
    if (stress == 0.0 || drop < tol * std::max(stress, 1e-300)) break;
  }

  res.x = std::move(x);
  res.stress = stress;
  return res;
}

}  // namespace peq::embed
