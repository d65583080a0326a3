#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peq/embed.hpp"
#include "peq/net.hpp"
#include "peq/types.hpp"

namespace peq::train {

struct TrainConfig {
  int epochs = 500;
  int batch_size = 128;
  double learning_rate = 1e-3;
  int hidden = 16;
  double dropout = 0.0;
  int layers = 2;
  int tail_hidden = 8;
  double beta = 0.005;
  std::uint64_t seed = 0;
};

enum class Mode { joint_peq, separate_per_policy };

// epoch-mean loss component: kind 'Q' rows carry the policy index, 'G' rows -1
struct LossRow {
  int epoch = 0;
  int t = 0;
  int policy = -1;
  char kind = 'Q';
  double value = 0.0;
};

// Joint mode holds one parameter set and one embedding covering every policy;
// separate mode holds one of each per policy.
struct TrainedEstimator {
  Mode mode = Mode::joint_peq;
  std::vector<net::ModelParams> thetas;
  std::vector<Policy> policies;
  std::vector<embed::PolicyEmbedding> embeddings;
  TrainConfig cfg;
  std::vector<LossRow> log;
};

// Backward-recursive multi-policy training: per batch and step t, regress the
// live Q at the observed action on the target copy's prediction at the policy
// action one step ahead (the raw outcome at t = tau), plus a BCE propensity
// loss; SGD step, then a Polyak update of the target copy.
TrainedEstimator train_peq(const Dataset& ds, const std::vector<Policy>& policies,
                           const ActionMatrix& actions,
                           const embed::PolicyEmbedding& embedding, const TrainConfig& cfg);

// Baseline paradigm: an independent single-policy estimator per policy, each
// with its own initialization (seed derived per policy index) and its own
// one-policy embedding.
TrainedEstimator train_separate(const Dataset& ds, const std::vector<Policy>& policies,
                                const ActionMatrix& actions, const TrainConfig& cfg);

// Policy-free fit quality: terminal-step Q MSE at the observed action with an
// empty tail, plus the summed per-step propensity BCE.
double factual_loss(const net::ModelParams& theta, const Dataset& ds);

struct HyperGrid {
  std::vector<int> batch_size{128, 256};
  std::vector<double> learning_rate{5e-4, 1e-3, 5e-3};
  std::vector<int> hidden{8, 16, 32};
  std::vector<double> dropout{0.0, 0.1};
  std::vector<int> layers{1, 2, 3};
  std::vector<int> tail_hidden{8, 16};
};

// Random search: draws n_draws configs from the grid (epochs, beta, and seed
// come from base), trains each on train_ds, and returns the config with the
// lowest validation factual loss; ties keep the earliest draw. A single draw
// is returned as-is without training.
TrainConfig select_hyperparams(const Dataset& train_ds, const Dataset& val_ds,
                               const std::vector<Policy>& policies,
                               const ActionMatrix& actions,
                               const embed::PolicyEmbedding& embedding,
                               const HyperGrid& grid, int n_draws, const TrainConfig& base,
                               std::uint64_t seed);

// One-policy embedding used by the separate paradigm: fixed sequences bypass
// MDS and feed their own action values; other kinds get the zero-row embedding.
embed::PolicyEmbedding separate_embedding(const Policy& p, int tau);

void write_training_log(const std::string& path, const TrainedEstimator& est);

}  // namespace peq::train
