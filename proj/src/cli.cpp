#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "peq/bench.hpp"
#include "peq/dataset_io.hpp"
#include "peq/embed.hpp"
#include "peq/errors.hpp"
#include "peq/net.hpp"
#include "peq/rng.hpp"
#include "peq/target.hpp"
#include "peq/train.hpp"

namespace peq::bench {

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string mode;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "experiment config file (key = value lines)")
      ->required();
  args.seed_opt =
      sub->add_option("--seed", args.seed, "override the config's seed list with one seed");
  args.out_opt = sub->add_option("--out", args.out, "output directory");
  args.mode_opt = sub->add_option("--mode", args.mode, "training paradigm: joint or separate");
}

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  const bool cache_defaulted = cfg.oracle_cache_dir == cfg.output_dir + "/oracle_cache";
  if (args.out_opt && args.out_opt->count() > 0) cfg.output_dir = args.out;
  if (cache_defaulted) cfg.oracle_cache_dir = cfg.output_dir + "/oracle_cache";
  if (args.seed_opt && args.seed_opt->count() > 0) cfg.seeds = {args.seed};
  if (args.mode_opt && args.mode_opt->count() > 0) {
    if (args.mode == "joint") {
      cfg.mode = train::Mode::joint_peq;
    } else if (args.mode == "separate") {
      cfg.mode = train::Mode::separate_per_policy;
    } else {
      throw ConfigError("--mode: expected joint or separate, got '" + args.mode + "'");
    }
  }
  return cfg;
}

struct FitResult {
  dgp::DgpSpec spec;
  Dataset ds;
  std::vector<Policy> policies;
  ActionMatrix actions;
  train::TrainedEstimator est;
};

// One-shot pipeline on the first configured seed with the configured
// hyperparameters (the random search only runs inside run-experiment).
FitResult fit_once(const ExperimentConfig& cfg) {
  FitResult r;
  r.spec = cfg.dgp;
  r.spec.seed = cfg.seeds.front();
  r.ds = dgp::simulate(r.spec, cfg.n);
  r.policies = build_suite(cfg.suite, cfg.dgp);
  r.actions = apply_policies(r.policies, r.ds, &r.spec);

  const bool all_fixed =
      std::all_of(r.policies.begin(), r.policies.end(),
                  [](const Policy& p) { return p.kind == PolicyKind::fixed_sequence; });
  embed::KernelConfig kc;
  kc.gamma_multiplier = cfg.gamma_multiplier;
  const embed::PolicyEmbedding embedding =
      all_fixed ? embed::deterministic_bypass(r.policies, r.ds.tau)
                : embed::embed_policies(r.ds, r.actions, kc, 2);

  train::TrainConfig tc = cfg.train_cfg;
  tc.seed = derive_seed(r.spec.seed, 0x7121A1ull);
  r.est = cfg.mode == train::Mode::joint_peq
              ? train::train_peq(r.ds, r.policies, r.actions, embedding, tc)
              : train::train_separate(r.ds, r.policies, r.actions, tc);
  return r;
}

void cmd_simulate(const ExperimentConfig& cfg) {
  dgp::DgpSpec spec = cfg.dgp;
  spec.seed = cfg.seeds.front();
  const Dataset ds = dgp::simulate(spec, cfg.n);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/dataset.jsonl";
  save_dataset(ds, path);
  std::cout << "wrote " << ds.n() << " trajectories to " << path << "\n";
}

void cmd_embed(const ExperimentConfig& cfg) {
  dgp::DgpSpec spec = cfg.dgp;
  spec.seed = cfg.seeds.front();
  const Dataset ds = dgp::simulate(spec, cfg.n);
  const std::vector<Policy> policies = build_suite(cfg.suite, cfg.dgp);
  const ActionMatrix actions = apply_policies(policies, ds, &spec);

  const bool all_fixed =
      std::all_of(policies.begin(), policies.end(),
                  [](const Policy& p) { return p.kind == PolicyKind::fixed_sequence; });
  embed::KernelConfig kc;
  kc.gamma_multiplier = cfg.gamma_multiplier;

  nlohmann::json j;
  j["suite"] = cfg.suite;
  j["bypass"] = all_fixed;
  nlohmann::json steps = nlohmann::json::array();
  if (all_fixed) {
    const auto emb = embed::deterministic_bypass(policies, ds.tau);
    j["dim"] = emb.dim;
    for (int t = 1; t <= ds.tau; ++t) {
      nlohmann::json step;
      step["t"] = t;
      step["stress"] = emb.stress_t[t - 1];
      nlohmann::json rho = nlohmann::json::array();
      for (int k = 0; k < static_cast<int>(policies.size()); ++k) {
        rho.push_back(std::vector<double>{emb.rho_t[t - 1](k, 0)});
      }
      step["rho"] = rho;
      steps.push_back(step);
    }
  } else {
    const auto dist = embed::distance_matrices(ds, actions, kc);
    const auto emb = embed::embed_policies(ds, actions, kc, 2);
    j["dim"] = emb.dim;
    for (int t = 1; t <= ds.tau; ++t) {
      nlohmann::json step;
      step["t"] = t;
      step["gamma"] = dist.gamma_t[t - 1];
      step["scale"] = dist.scale_t[t - 1];
      step["stress"] = emb.stress_t[t - 1];
      nlohmann::json d = nlohmann::json::array();
      nlohmann::json rho = nlohmann::json::array();
      for (int a = 0; a < dist.d_t[t - 1].rows(); ++a) {
        std::vector<double> row(dist.d_t[t - 1].cols());
        for (int b = 0; b < dist.d_t[t - 1].cols(); ++b) row[b] = dist.d_t[t - 1](a, b);
        d.push_back(row);
        std::vector<double> r(emb.rho_t[t - 1].cols());
        for (int b = 0; b < emb.rho_t[t - 1].cols(); ++b) r[b] = emb.rho_t[t - 1](a, b);
        rho.push_back(r);
      }
      step["distance"] = d;
      step["rho"] = rho;
      steps.push_back(step);
    }
  }
  j["steps"] = steps;

  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/embedding.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << j.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
}

void cmd_train(const ExperimentConfig& cfg) {
  const FitResult r = fit_once(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  if (r.est.mode == train::Mode::joint_peq) {
    net::save_params(cfg.output_dir + "/model.json", r.est.thetas[0]);
  } else {
    for (std::size_t k = 0; k < r.est.thetas.size(); ++k) {
      net::save_params(cfg.output_dir + "/model_" + r.est.policies[k].label + ".json",
                       r.est.thetas[k]);
    }
  }
  train::write_training_log(cfg.output_dir + "/training_log.csv", r.est);
  std::cout << "wrote model checkpoint(s) and training_log.csv to " << cfg.output_dir << "\n";
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  const FitResult r = fit_once(cfg);
  const target::EstimateReport report =
      target::estimate_all(r.ds, r.est, r.actions, cfg.lambda, cfg.clip);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/estimates.csv";
  target::write_estimates_csv(path, report);
  std::cout << "wrote " << path << "\n";
}

void cmd_run_experiment(const ExperimentConfig& cfg) {
  const MetricsTable m = run_experiment(cfg);
  emit_report(m, cfg.output_dir);
  for (const auto& f : m.failures) std::cerr << "failed " << f << "\n";
  std::cout << "wrote metrics.csv, summary.md, rmse.svg to " << cfg.output_dir << "\n";
  if (m.rows.empty()) throw IoError("every seed failed; see " + cfg.output_dir + "/summary.md");
}

void cmd_diagnose(const ExperimentConfig& cfg) {
  const FitResult r = fit_once(cfg);
  std::vector<std::pair<int, int>> pairs;
  for (int k = 1; k < static_cast<int>(r.policies.size()); ++k) pairs.emplace_back(k, 0);
  embed::KernelConfig kc;
  kc.gamma_multiplier = cfg.gamma_multiplier;
  const target::RemainderDiagnostic diag =
      target::remainder_diagnostic(r.spec, r.ds, r.est, r.actions, pairs, cfg.n_mc_qstar,
                                   derive_seed(r.spec.seed, 0xD1A6ull), cfg.clip, kc);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/diagnostics.csv";
  target::write_diagnostics_csv(path, diag);
  std::cout << "wrote " << path << "\n";
}

void cmd_bandwidth_sweep(const ExperimentConfig& cfg) {
  bandwidth_sweep(cfg, {0.01, 0.1, 1.0, 10.0, 100.0}, cfg.output_dir);
  std::cout << "wrote bandwidth_sweep.csv and per-multiplier reports to " << cfg.output_dir
            << "\n";
}

void cmd_scale_k(const ExperimentConfig& cfg) {
  scale_k_timing(cfg, {5, 10, 20}, cfg.output_dir);
  std::cout << "wrote scale_k.csv to " << cfg.output_dir << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Smooth multi-policy longitudinal effect estimation"};
  app.require_subcommand(1);

  struct Entry {
    CommonArgs args;
    std::function<void(const ExperimentConfig&)> fn;
    CLI::App* sub = nullptr;
  };
  std::vector<Entry> entries;
  entries.reserve(8);

  auto add = [&](const std::string& name, const std::string& help,
                 std::function<void(const ExperimentConfig&)> fn) -> Entry& {
    Entry e;
    e.fn = std::move(fn);
    e.sub = app.add_subcommand(name, help);
    entries.push_back(std::move(e));
    add_common(entries.back().sub, entries.back().args);
    return entries.back();
  };

  add("simulate", "generate one cohort and write dataset.jsonl", cmd_simulate);
  add("embed-policies", "per-step policy distances and MDS coordinates", cmd_embed);
  add("train", "fit the estimator on one seed and write checkpoints", cmd_train);
  add("evaluate", "fit on one seed and write targeted effect estimates", cmd_evaluate);
  Entry& exp =
      add("run-experiment", "multi-seed benchmark with reports", cmd_run_experiment);
  add("diagnose-remainder", "per-step remainder decomposition against oracles", cmd_diagnose);
  add("bandwidth-sweep", "re-run the benchmark across kernel bandwidth multipliers",
      cmd_bandwidth_sweep);
  add("scale-K", "embedding runtime as the policy count grows", cmd_scale_k);

  double eval_split = 0.0;
  CLI::Option* eval_opt = exp.sub->add_option(
      "--eval-split", eval_split, "fraction held out for targeting (default: reuse all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  for (const Entry& e : entries) {
    if (!e.sub->parsed()) continue;
    try {
      ExperimentConfig cfg = load_with_overrides(e.args);
      if (e.sub == exp.sub && eval_opt->count() > 0) {
        if (eval_split < 0.0 || eval_split >= 1.0) {
          throw ConfigError("--eval-split: must lie in [0, 1)");
        }
        cfg.eval_split = eval_split;
      }
      e.fn(cfg);
      return 0;
    } catch (const ConfigError& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return 1;
    } catch (const std::invalid_argument& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return 1;
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return 2;
    }
  }
  return 1;
}

}  // namespace peq::bench
