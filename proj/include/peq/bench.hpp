#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peq/dgp.hpp"
#include "peq/target.hpp"
#include "peq/train.hpp"
#include "peq/types.hpp"

namespace peq::bench {

struct ExperimentConfig {
  dgp::DgpSpec dgp;
  int n = 1000;
  std::string suite = "deterministic_a";
  train::Mode mode = train::Mode::joint_peq;
  std::vector<std::uint64_t> seeds;
  train::TrainConfig train_cfg;
  double lambda = 0.01;
  target::ClipBounds clip;
  std::string output_dir = "out";
  // 0 skips the random search and uses train_cfg as-is
  int hyper_draws = 5;
  // fraction held out for evaluation; 0 evaluates on the training cohort
  double eval_split = 0.0;
  std::int64_t oracle_n_mc = 100000;
  double gamma_multiplier = 1.0;
  std::string oracle_cache_dir;
  int n_mc_qstar = 200;
};

// Flat key = value file; unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);

// Named policy sets: deterministic_a (always-treat baseline, never, start at
// step 5, first 10 steps), dynamic_b (threshold 0.5 baseline, 0.4/0.6 on the
// first two steps only), dynamic_c (constant 0.4/0.6 plus the 0/1 extremes),
// duplicate (two identical 0.5 thresholds). The baseline is index 0.
std::vector<Policy> build_suite(const std::string& name, const dgp::DgpSpec& spec);

struct SeedRow {
  std::string contrast;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double oracle = 0.0;
  double abs_bias = 0.0;
};

struct AggRow {
  std::string contrast;
  double mean_abs_bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  int n_seeds = 0;
};

struct MetricsTable {
  std::string suite;
  std::vector<SeedRow> rows;
  std::vector<AggRow> aggregates;
  std::vector<std::string> failures;
};

// Ground-truth contrast against the suite baseline, memoized on disk keyed by
// the generator and policy content (the data seed does not enter the key).
dgp::OracleResult cached_oracle_cate(const dgp::DgpSpec& spec, const Policy& p_i,
                                     const Policy& p_j, std::int64_t n_mc,
                                     const std::string& cache_dir);

// Full protocol per seed: simulate, select hyperparameters on an 80/20 split,
// embed, train in the configured mode, target, and record every contrast
// against the baseline. A failing seed is logged and skipped.
MetricsTable run_experiment(const ExperimentConfig& cfg);

void emit_report(const MetricsTable& m, const std::string& dir);
MetricsTable read_metrics_csv(const std::string& path);

// Re-runs the experiment once per kernel-bandwidth multiplier and writes
// bandwidth_sweep.csv (multiplier, contrast, rmse, mean_abs_bias) plus one
// report subdirectory per multiplier.
void bandwidth_sweep(const ExperimentConfig& cfg, const std::vector<double>& multipliers,
                     const std::string& dir);

// Times embed_policies on one simulated cohort for growing policy-set sizes
// (constant thresholds spread over [0.3, 0.7]) and writes scale_k.csv.
void scale_k_timing(const ExperimentConfig& cfg, const std::vector<int>& ks,
                    const std::string& dir);

// aggregate recomputation used by the reporting invariant checks
std::vector<AggRow> aggregate_rows(const std::vector<SeedRow>& rows);

int run_cli(int argc, char** argv);

}  // namespace peq::bench
