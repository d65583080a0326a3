#include "peq/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "peq/errors.hpp"

namespace peq::train {

namespace {

// numerically stable BCE of a logit against a label in [0,1]
double bce_mean(const Eigen::VectorXd& logit, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < logit.size(); ++i) {
    const double z = logit(i);
    s += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - z * y(i);
  }
  return s / static_cast<double>(logit.size());
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Eigen::VectorXd observed_actions(const Dataset& ds, const std::vector<int>& rows, int t) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    a(static_cast<Eigen::Index>(i)) = static_cast<double>(
        ds.trajectories[static_cast<std::size_t>(rows[i])].actions[static_cast<std::size_t>(t - 1)]);
  return a;
}

Eigen::VectorXd policy_actions(const Eigen::MatrixXi& m, const std::vector<int>& rows, int t) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    a(static_cast<Eigen::Index>(i)) = static_cast<double>(m(rows[i], t - 1));
  return a;
}

Eigen::VectorXd outcomes(const Dataset& ds, const std::vector<int>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = ds.trajectories[static_cast<std::size_t>(rows[i])].outcome;
  return y;
}

// per-policy rho matrix (tau x dim) sliced out of the per-step embedding
Eigen::MatrixXd policy_rho(const embed::PolicyEmbedding& emb, int k, int tau) {
  Eigen::MatrixXd rho(tau, emb.dim);
  for (int t = 0; t < tau; ++t) rho.row(t) = emb.rho_t[static_cast<std::size_t>(t)].row(k);
  return rho;
}

TrainedEstimator train_core(const Dataset& ds, const std::vector<Policy>& policies,
                            const ActionMatrix& actions,
                            const embed::PolicyEmbedding& embedding, const TrainConfig& cfg,
                            Mode mode) {
  const int n = ds.n();
  const int tau = ds.tau;
  const int k_pol = static_cast<int>(policies.size());
  if (k_pol == 0) throw ConfigError("no policies to train on");
  if (actions.n_policies() != k_pol) throw ShapeError("one action matrix per policy required");
  if (actions.n() != n || actions.tau() != tau)
    throw ShapeError("action matrix shape does not match the dataset");
  if (static_cast<int>(embedding.rho_t.size()) != tau ||
      embedding.rho_t[0].rows() != k_pol)
    throw ShapeError("embedding does not cover every policy and step");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("epochs and batch size must be positive");

  net::ModelDims dims;
  dims.d_l = ds.d_l;
  dims.rho_dim = embedding.dim;
  dims.hidden = cfg.hidden;
  dims.tail_hidden = cfg.tail_hidden;
  dims.layers = cfg.layers;
  dims.dropout = cfg.dropout;

  net::ModelParams theta = net::init_params(dims, derive_seed(cfg.seed, 0xA11CEull));
  net::ModelParams target = theta;
  Rng shuffle_rng(Rng::derive(cfg.seed, 1));
  Rng dropout_rng(Rng::derive(cfg.seed, 2));

  std::vector<Eigen::MatrixXd> rho(static_cast<std::size_t>(k_pol));
  for (int k = 0; k < k_pol; ++k) rho[static_cast<std::size_t>(k)] = policy_rho(embedding, k, tau);

  TrainedEstimator est;
  est.mode = mode;
  est.policies = policies;
  est.embeddings = {embedding};
  est.cfg = cfg;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    Eigen::VectorXd sum_g = Eigen::VectorXd::Zero(tau);
    Eigen::MatrixXd sum_q = Eigen::MatrixXd::Zero(tau, k_pol);

    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      const std::vector<int> rows(order.begin() + start, order.begin() + start + b);

      net::EncoderCache enc = net::encode_history(theta, ds, rows);
      net::EncoderCache enc_t = net::encode_history(target, ds, rows);
      std::vector<net::TailCache> tail(static_cast<std::size_t>(k_pol));
      std::vector<net::TailCache> tail_t(static_cast<std::size_t>(k_pol));
      for (int k = 0; k < k_pol; ++k) {
        tail[static_cast<std::size_t>(k)] = net::encode_tail_all(theta, rho[static_cast<std::size_t>(k)]);
        tail_t[static_cast<std::size_t>(k)] = net::encode_tail_all(target, rho[static_cast<std::size_t>(k)]);
      }
      const Eigen::VectorXd y = outcomes(ds, rows);

      net::Gradients grads = net::zero_like(theta);
      std::vector<Eigen::MatrixXd> d_h(static_cast<std::size_t>(tau) + 1,
                                       Eigen::MatrixXd::Zero(b, cfg.hidden));
      std::vector<std::vector<Eigen::VectorXd>> d_e(
          static_cast<std::size_t>(k_pol),
          std::vector<Eigen::VectorXd>(static_cast<std::size_t>(tau) + 2));

      for (int t = 1; t <= tau; ++t) {
        const Eigen::MatrixXd& h_t = enc.h[static_cast<std::size_t>(t)];
        const Eigen::VectorXd a_obs = observed_actions(ds, rows, t);

        net::HeadCache cg;
        const Eigen::VectorXd logit =
            net::head_forward(theta.g_head, h_t, cfg.dropout, &dropout_rng, &cg);
        sum_g(t - 1) += bce_mean(logit, a_obs) * b;
        const Eigen::VectorXd d_logit = (sigmoid(logit) - a_obs) / static_cast<double>(b);
        Eigen::MatrixXd d_in;
        net::head_backward(theta.g_head, cg, d_logit, grads.g_head, d_in);
        d_h[static_cast<std::size_t>(t)] += d_in;

        for (int k = 0; k < k_pol; ++k) {
          const Eigen::MatrixXi& amat = actions.policy_actions[static_cast<std::size_t>(k)];
          Eigen::VectorXd tgt;
          if (t == tau) {
            tgt = y;
          } else {
            const Eigen::MatrixXd zt =
                net::q_input(enc_t.h[static_cast<std::size_t>(t + 1)], policy_actions(amat, rows, t + 1),
                             tail_t[static_cast<std::size_t>(k)].e[static_cast<std::size_t>(t + 2)]);
            tgt = net::head_forward(target.q_head, zt, 0.0, nullptr, nullptr);
          }
          const Eigen::MatrixXd z =
              net::q_input(h_t, a_obs, tail[static_cast<std::size_t>(k)].e[static_cast<std::size_t>(t + 1)]);
          net::HeadCache cq;
          const Eigen::VectorXd pred =
              net::head_forward(theta.q_head, z, cfg.dropout, &dropout_rng, &cq);
          const Eigen::VectorXd resid = pred - tgt;
          sum_q(t - 1, k) += resid.squaredNorm();
          const Eigen::VectorXd d_pred = 2.0 * resid / static_cast<double>(b);
          net::head_backward(theta.q_head, cq, d_pred, grads.q_head, d_in);
          d_h[static_cast<std::size_t>(t)] += d_in.leftCols(cfg.hidden);
          Eigen::VectorXd acc = d_in.rightCols(cfg.tail_hidden).colwise().sum().transpose();
          auto& slot = d_e[static_cast<std::size_t>(k)][static_cast<std::size_t>(t + 1)];
          if (slot.size() == 0)
            slot = std::move(acc);
          else
            slot += acc;
        }
      }

      net::encoder_backward(theta, enc, d_h, grads.enc);
      for (int k = 0; k < k_pol; ++k)
        net::tail_backward(theta, tail[static_cast<std::size_t>(k)], d_e[static_cast<std::size_t>(k)],
                           grads.tail);

      const double lr = cfg.learning_rate;
      net::visit_tensor_pairs(theta, grads, [lr](auto& p, const auto& g) { p -= lr * g; });
      net::polyak_update(target, theta, cfg.beta);
    }

    for (int t = 1; t <= tau; ++t) {
      est.log.push_back({epoch, t, -1, 'G', sum_g(t - 1) / n});
      for (int k = 0; k < k_pol; ++k)
        est.log.push_back({epoch, t, k, 'Q', sum_q(t - 1, k) / n});
    }
  }

  est.thetas.push_back(std::move(theta));
  return est;
}

}  // namespace

TrainedEstimator train_peq(const Dataset& ds, const std::vector<Policy>& policies,
                           const ActionMatrix& actions,
                           const embed::PolicyEmbedding& embedding, const TrainConfig& cfg) {
  return train_core(ds, policies, actions, embedding, cfg, Mode::joint_peq);
}

embed::PolicyEmbedding separate_embedding(const Policy& p, int tau) {
  if (p.kind == PolicyKind::fixed_sequence) return embed::deterministic_bypass({p}, tau);
  embed::PolicyEmbedding emb;
  emb.dim = 2;
  for (int t = 0; t < tau; ++t) {
    emb.rho_t.push_back(Eigen::MatrixXd::Zero(1, emb.dim));
    emb.stress_t.push_back(0.0);
  }
  return emb;
}

TrainedEstimator train_separate(const Dataset& ds, const std::vector<Policy>& policies,
                                const ActionMatrix& actions, const TrainConfig& cfg) {
  if (policies.empty()) throw ConfigError("no policies to train on");
  TrainedEstimator est;
  est.mode = Mode::separate_per_policy;
  est.policies = policies;
  est.cfg = cfg;
  for (std::size_t k = 0; k < policies.size(); ++k) {
    TrainConfig one = cfg;
    one.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    ActionMatrix single;
    single.policy_actions = {actions.policy_actions[k]};
    embed::PolicyEmbedding emb = separate_embedding(policies[k], ds.tau);
    TrainedEstimator sub =
        train_core(ds, {policies[k]}, single, emb, one, Mode::separate_per_policy);
    est.thetas.push_back(std::move(sub.thetas[0]));
    est.embeddings.push_back(std::move(sub.embeddings[0]));
    for (LossRow row : sub.log) {
      row.policy = static_cast<int>(k);
      est.log.push_back(row);
    }
  }
  return est;
}

double factual_loss(const net::ModelParams& theta, const Dataset& ds) {
  const int n = ds.n();
  const int tau = ds.tau;
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  net::EncoderCache enc = net::encode_history(theta, ds, rows);

  const Eigen::VectorXd a_tau = observed_actions(ds, rows, tau);
  const Eigen::VectorXd e_empty = Eigen::VectorXd::Zero(theta.dims.tail_hidden);
  const Eigen::MatrixXd z = net::q_input(enc.h[static_cast<std::size_t>(tau)], a_tau, e_empty);
  const Eigen::VectorXd pred = net::head_forward(theta.q_head, z, 0.0, nullptr, nullptr);
  const Eigen::VectorXd y = outcomes(ds, rows);
  double loss = (pred - y).squaredNorm() / static_cast<double>(n);

  for (int t = 1; t <= tau; ++t) {
    const Eigen::VectorXd logit =
        net::head_forward(theta.g_head, enc.h[static_cast<std::size_t>(t)], 0.0, nullptr, nullptr);
    loss += bce_mean(logit, observed_actions(ds, rows, t));
  }
  return loss;
}

TrainConfig select_hyperparams(const Dataset& train_ds, const Dataset& val_ds,
                               const std::vector<Policy>& policies,
                               const ActionMatrix& actions,
                               const embed::PolicyEmbedding& embedding,
                               const HyperGrid& grid, int n_draws, const TrainConfig& base,
                               std::uint64_t seed) {
  if (n_draws < 1) throw ConfigError("hyperparameter search needs at least one draw");
  Rng rng(derive_seed(seed, 0xD12Aull));
  auto pick_int = [&rng](const std::vector<int>& v) {
    return v[static_cast<std::size_t>(rng.below(v.size()))];
  };
  auto pick_real = [&rng](const std::vector<double>& v) {
    return v[static_cast<std::size_t>(rng.below(v.size()))];
  };

  std::vector<TrainConfig> draws;
  for (int d = 0; d < n_draws; ++d) {
    TrainConfig c = base;
    c.batch_size = pick_int(grid.batch_size);
    c.learning_rate = pick_real(grid.learning_rate);
    c.hidden = pick_int(grid.hidden);
    c.dropout = pick_real(grid.dropout);
    c.layers = pick_int(grid.layers);
    c.tail_hidden = pick_int(grid.tail_hidden);
    draws.push_back(c);
  }
  if (n_draws == 1) return draws[0];

  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t d = 0; d < draws.size(); ++d) {
    TrainedEstimator est = train_peq(train_ds, policies, actions, embedding, draws[d]);
    const double loss = factual_loss(est.thetas[0], val_ds);
    if (loss < best_loss) {
      best_loss = loss;
      best = d;
    }
  }
  return draws[best];
}

void write_training_log(const std::string& path, const TrainedEstimator& est) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,t,policy_label,loss_kind,value\n";
  for (const LossRow& row : est.log) {
    const std::string label =
        row.policy < 0 ? "" : est.policies[static_cast<std::size_t>(row.policy)].label;
    out << row.epoch << "," << row.t << "," << label << "," << row.kind << ","
        << row.value << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace peq::train
