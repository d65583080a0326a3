#include "peq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "peq/embed.hpp"
#include "peq/errors.hpp"
#include "peq/rng.hpp"

namespace peq::bench {

namespace {

namespace fs = std::filesystem;

// shortest round-trip decimal form, so emitted CSVs are byte-deterministic
std::string num(double v) { return nlohmann::json(v).dump(); }

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    double v = std::stod(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    long long v = std::stoll(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    unsigned long long v = std::stoull(value, &idx);
    if (idx != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as an unsigned integer");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Content identity of a policy: kind plus its parameters. Labels stay out so
// renaming a policy does not invalidate cached oracle values.
std::string policy_canon(const Policy& p) {
  std::ostringstream os;
  os << static_cast<int>(p.kind);
  for (double g : p.thresholds) os << ',' << num(g);
  for (int a : p.sequence) os << ',' << a;
  os << ';';
  return os.str();
}

std::string oracle_key(const dgp::DgpSpec& spec, const Policy& p_i, const Policy& p_j,
                       std::int64_t n_mc) {
  std::ostringstream os;
  os << static_cast<int>(spec.variant) << ',' << spec.tau << ',' << spec.d_x << ','
     << spec.d_z << ',' << spec.lag << ',' << num(spec.noise_sd_a) << ','
     << num(spec.noise_sd_y) << ',' << num(spec.noise_sd_z) << ',' << num(spec.omega[0])
     << ',' << num(spec.omega[1]) << ',' << num(spec.omega[2]) << ','
     << num(spec.x_scale) << ',' << n_mc << '|' << policy_canon(p_i) << policy_canon(p_j);
  return os.str();
}

Dataset subset_rows(const Dataset& ds, int lo, int hi) {
  std::vector<Trajectory> part(ds.trajectories.begin() + lo, ds.trajectories.begin() + hi);
  return make_dataset(std::move(part), ds.tau, ds.d_l);
}

ActionMatrix subset_actions(const ActionMatrix& am, int lo, int hi) {
  ActionMatrix out;
  out.policy_actions.reserve(am.policy_actions.size());
  for (const auto& m : am.policy_actions) {
    out.policy_actions.push_back(m.middleRows(lo, hi - lo));
  }
  return out;
}

void require_stream(const std::ofstream& out, const std::string& path) {
  if (!out) throw IoError("cannot write file: " + path);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);

  ExperimentConfig cfg;
  bool seeds_given = false;
  bool n_seeds_given = false;
  long long n_seeds = 20;

  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");
    }

    if (key == "variant") {
      if (value == "limited") {
        cfg.dgp.variant = dgp::Variant::limited;
      } else if (value == "expanded") {
        cfg.dgp.variant = dgp::Variant::expanded;
      } else if (value == "tiny") {
        cfg.dgp.variant = dgp::Variant::tiny;
      } else {
        throw ConfigError("config key 'variant': expected limited, expanded, or tiny, got '" +
                          value + "'");
      }
    } else if (key == "tau") {
      cfg.dgp.tau = static_cast<int>(parse_int(key, value));
    } else if (key == "d_x") {
      cfg.dgp.d_x = static_cast<int>(parse_int(key, value));
    } else if (key == "d_z") {
      cfg.dgp.d_z = static_cast<int>(parse_int(key, value));
    } else if (key == "lag") {
      cfg.dgp.lag = static_cast<int>(parse_int(key, value));
    } else if (key == "noise_sd_a") {
      cfg.dgp.noise_sd_a = parse_double(key, value);
    } else if (key == "noise_sd_y") {
      cfg.dgp.noise_sd_y = parse_double(key, value);
    } else if (key == "noise_sd_z") {
      cfg.dgp.noise_sd_z = parse_double(key, value);
    } else if (key == "x_scale") {
      cfg.dgp.x_scale = parse_double(key, value);
    } else if (key == "n") {
      cfg.n = static_cast<int>(parse_int(key, value));
    } else if (key == "suite") {
      cfg.suite = value;
    } else if (key == "mode") {
      if (value == "joint") {
        cfg.mode = train::Mode::joint_peq;
      } else if (value == "separate") {
        cfg.mode = train::Mode::separate_per_policy;
      } else {
        throw ConfigError("config key 'mode': expected joint or separate, got '" + value + "'");
      }
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& tok : split(value, ',')) {
        cfg.seeds.push_back(parse_u64(key, trim(tok)));
      }
      seeds_given = true;
    } else if (key == "n_seeds") {
      n_seeds = parse_int(key, value);
      n_seeds_given = true;
    } else if (key == "epochs") {
      cfg.train_cfg.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "batch_size") {
      cfg.train_cfg.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "learning_rate") {
      cfg.train_cfg.learning_rate = parse_double(key, value);
    } else if (key == "hidden") {
      cfg.train_cfg.hidden = static_cast<int>(parse_int(key, value));
    } else if (key == "dropout") {
      cfg.train_cfg.dropout = parse_double(key, value);
    } else if (key == "layers") {
      cfg.train_cfg.layers = static_cast<int>(parse_int(key, value));
    } else if (key == "tail_hidden") {
      cfg.train_cfg.tail_hidden = static_cast<int>(parse_int(key, value));
    } else if (key == "beta") {
      cfg.train_cfg.beta = parse_double(key, value);
    } else if (key == "lambda") {
      cfg.lambda = parse_double(key, value);
    } else if (key == "clip_lo") {
      cfg.clip.lo = parse_double(key, value);
    } else if (key == "clip_hi") {
      cfg.clip.hi = parse_double(key, value);
    } else if (key == "hyper_draws") {
      cfg.hyper_draws = static_cast<int>(parse_int(key, value));
    } else if (key == "eval_split") {
      cfg.eval_split = parse_double(key, value);
    } else if (key == "oracle_n_mc") {
      cfg.oracle_n_mc = parse_int(key, value);
    } else if (key == "gamma_multiplier") {
      cfg.gamma_multiplier = parse_double(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "oracle_cache_dir") {
      cfg.oracle_cache_dir = value;
    } else if (key == "n_mc_qstar") {
      cfg.n_mc_qstar = static_cast<int>(parse_int(key, value));
    } else {
      throw ConfigError("unknown config key '" + key + "' at " + path + ":" +
                        std::to_string(lineno));
    }
  }

  if (seeds_given && n_seeds_given) {
    throw ConfigError("give either 'seeds' or 'n_seeds', not both");
  }
  if (!seeds_given) {
    if (n_seeds < 1) throw ConfigError("config key 'n_seeds': must be at least 1");
    for (long long s = 1; s <= n_seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (cfg.seeds.empty()) throw ConfigError("config key 'seeds': at least one seed required");
  if (cfg.n < 2) throw ConfigError("config key 'n': at least 2 trajectories required");
  if (cfg.eval_split < 0.0 || cfg.eval_split >= 1.0) {
    throw ConfigError("config key 'eval_split': must lie in [0, 1)");
  }
  if (cfg.hyper_draws < 0) throw ConfigError("config key 'hyper_draws': must be >= 0");
  if (cfg.lambda < 0.0) throw ConfigError("config key 'lambda': must be >= 0");
  if (!(cfg.clip.lo > 0.0 && cfg.clip.lo < cfg.clip.hi && cfg.clip.hi < 1.0)) {
    throw ConfigError("config keys 'clip_lo'/'clip_hi': need 0 < lo < hi < 1");
  }
  if (cfg.oracle_n_mc < 1) throw ConfigError("config key 'oracle_n_mc': must be >= 1");
  if (cfg.n_mc_qstar < 1) throw ConfigError("config key 'n_mc_qstar': must be >= 1");
  if (cfg.oracle_cache_dir.empty()) cfg.oracle_cache_dir = cfg.output_dir + "/oracle_cache";
  return cfg;
}

std::vector<Policy> build_suite(const std::string& name, const dgp::DgpSpec& spec) {
  const int tau = spec.effective_tau();
  std::vector<Policy> ps;

  if (name == "deterministic_a") {
    std::vector<int> always(tau, 1);
    std::vector<int> never(tau, 0);
    std::vector<int> from_five(tau, 0);
    for (int t = 5; t <= tau; ++t) from_five[t - 1] = 1;
    std::vector<int> first_ten(tau, 0);
    for (int t = 1; t <= std::min(tau, 10); ++t) first_ten[t - 1] = 1;
    ps.push_back(Policy::fixed("baseline", always));
    ps.push_back(Policy::fixed("CF1a", never));
    ps.push_back(Policy::fixed("CF2a", from_five));
    ps.push_back(Policy::fixed("CF3a", first_ten));
  } else if (name == "dynamic_b") {
    std::vector<double> low(tau, 0.5);
    std::vector<double> high(tau, 0.5);
    for (int t = 0; t < std::min(tau, 2); ++t) {
      low[t] = 0.4;
      high[t] = 0.6;
    }
    ps.push_back(Policy::constant_threshold("baseline", 0.5, tau));
    ps.push_back(Policy::threshold("CF1b", low));
    ps.push_back(Policy::threshold("CF2b", high));
  } else if (name == "dynamic_c") {
    ps.push_back(Policy::constant_threshold("baseline", 0.5, tau));
    ps.push_back(Policy::constant_threshold("CF1c", 0.4, tau));
    ps.push_back(Policy::constant_threshold("CF2c", 0.6, tau));
    ps.push_back(Policy::constant_threshold("CF3c", 0.0, tau));
    ps.push_back(Policy::constant_threshold("CF4c", 1.0, tau));
  } else if (name == "duplicate") {
    ps.push_back(Policy::constant_threshold("baseline", 0.5, tau));
    ps.push_back(Policy::constant_threshold("copy", 0.5, tau));
  } else {
    throw ConfigError("unknown policy suite '" + name + "'");
  }
  return ps;
}

dgp::OracleResult cached_oracle_cate(const dgp::DgpSpec& spec, const Policy& p_i,
                                     const Policy& p_j, std::int64_t n_mc,
                                     const std::string& cache_dir) {
  const std::uint64_t h = fnv1a(oracle_key(spec, p_i, p_j, n_mc));
  std::string path;
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    path = cache_dir + "/" + hex64(h) + ".json";
    std::ifstream in(path);
    if (in) {
      try {
        nlohmann::json j = nlohmann::json::parse(in);
        dgp::OracleResult r;
        r.value = j.at("value").get<double>();
        r.mc_std_error = j.at("mc_std_error").get<double>();
        r.n_mc = j.at("n_mc").get<std::int64_t>();
        r.exhaustive = j.at("exhaustive").get<bool>();
        return r;
      } catch (const std::exception&) {
        // stale or truncated entry, fall through and recompute
      }
    }
  }

  // The Monte-Carlo seed comes from the content hash, so the cached value is
  // independent of which experiment seed first asked for it.
  dgp::OracleResult r = dgp::oracle_cate(spec, p_i, p_j, n_mc, derive_seed(0x0AC1Eull, h));
  if (!path.empty()) {
    nlohmann::json j;
    j["value"] = r.value;
    j["mc_std_error"] = r.mc_std_error;
    j["n_mc"] = r.n_mc;
    j["exhaustive"] = r.exhaustive;
    std::ofstream out(path);
    require_stream(out, path);
    out << j.dump() << "\n";
  }
  return r;
}

std::vector<AggRow> aggregate_rows(const std::vector<SeedRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SeedRow*>> groups;
  for (const auto& r : rows) {
    auto [it, inserted] = groups.try_emplace(r.contrast);
    if (inserted) order.push_back(r.contrast);
    it->second.push_back(&r);
  }

  std::vector<AggRow> out;
  for (const auto& contrast : order) {
    const auto& g = groups[contrast];
    const int m = static_cast<int>(g.size());
    double mean_abs = 0.0;
    double mse = 0.0;
    for (const SeedRow* r : g) {
      mean_abs += r->abs_bias;
      mse += (r->estimate - r->oracle) * (r->estimate - r->oracle);
    }
    mean_abs /= m;
    mse /= m;
    double sd = 0.0;
    if (m > 1) {
      for (const SeedRow* r : g) sd += (r->abs_bias - mean_abs) * (r->abs_bias - mean_abs);
      sd = std::sqrt(sd / (m - 1));
    }
    out.push_back({contrast, mean_abs, sd, std::sqrt(mse), m});
  }
  return out;
}

MetricsTable run_experiment(const ExperimentConfig& cfg) {
  dgp::validate(cfg.dgp);
  if (cfg.seeds.empty()) throw ConfigError("no seeds configured");
  const std::vector<Policy> policies = build_suite(cfg.suite, cfg.dgp);
  const int K = static_cast<int>(policies.size());

  MetricsTable table;
  table.suite = cfg.suite;

  std::vector<double> truth(K, 0.0);
  for (int k = 1; k < K; ++k) {
    truth[k] =
        cached_oracle_cate(cfg.dgp, policies[k], policies[0], cfg.oracle_n_mc,
                           cfg.oracle_cache_dir)
            .value;
  }

  const bool all_fixed = std::all_of(policies.begin(), policies.end(), [](const Policy& p) {
    return p.kind == PolicyKind::fixed_sequence;
  });

  for (std::uint64_t seed : cfg.seeds) {
    try {
      dgp::DgpSpec spec = cfg.dgp;
      spec.seed = seed;
      const Dataset full = dgp::simulate(spec, cfg.n);

      const int n_eval = static_cast<int>(std::lround(cfg.eval_split * cfg.n));
      if (n_eval >= cfg.n - 1) {
        throw ConfigError("eval_split leaves fewer than 2 training trajectories");
      }
      // trajectories are exchangeable, so a suffix split is already random
      const Dataset fit_ds = n_eval > 0 ? subset_rows(full, 0, cfg.n - n_eval) : full;
      const ActionMatrix fit_actions = apply_policies(policies, fit_ds, &spec);

      embed::KernelConfig kc;
      kc.gamma_multiplier = cfg.gamma_multiplier;
      const embed::PolicyEmbedding embedding =
          all_fixed ? embed::deterministic_bypass(policies, fit_ds.tau)
                    : embed::embed_policies(fit_ds, fit_actions, kc, 2);

      train::TrainConfig tc = cfg.train_cfg;
      tc.seed = derive_seed(seed, 0x7121A1ull);
      if (cfg.hyper_draws >= 1) {
        const int n_fit = fit_ds.n();
        int n_sel = static_cast<int>(std::lround(0.8 * n_fit));
        n_sel = std::clamp(n_sel, 1, n_fit - 1);
        const Dataset sel_train = subset_rows(fit_ds, 0, n_sel);
        const Dataset sel_val = subset_rows(fit_ds, n_sel, n_fit);
        const ActionMatrix sel_actions = subset_actions(fit_actions, 0, n_sel);
        const embed::PolicyEmbedding sel_embedding =
            all_fixed ? embedding : embed::embed_policies(sel_train, sel_actions, kc, 2);
        tc = train::select_hyperparams(sel_train, sel_val, policies, sel_actions,
                                       sel_embedding, train::HyperGrid{}, cfg.hyper_draws, tc,
                                       derive_seed(seed, 0x5E1Cull));
      }

      const train::TrainedEstimator est =
          cfg.mode == train::Mode::joint_peq
              ? train::train_peq(fit_ds, policies, fit_actions, embedding, tc)
              : train::train_separate(fit_ds, policies, fit_actions, tc);

      const Dataset eval_ds = n_eval > 0 ? subset_rows(full, cfg.n - n_eval, cfg.n) : full;
      const ActionMatrix eval_actions =
          n_eval > 0 ? apply_policies(policies, eval_ds, &spec) : fit_actions;
      const target::EstimateReport report =
          target::estimate_all(eval_ds, est, eval_actions, cfg.lambda, cfg.clip);

      for (int k = 1; k < K; ++k) {
        double est_val = 0.0;
        bool found = false;
        for (const auto& c : report.contrasts) {
          if (c.i == k && c.j == 0) {
            est_val = c.cate;
            found = true;
            break;
          }
        }
        if (!found) throw ShapeError("estimate report is missing a baseline contrast");
        SeedRow row;
        row.contrast = policies[k].label + "-" + policies[0].label;
        row.seed = seed;
        row.estimate = est_val;
        row.oracle = truth[k];
        row.abs_bias = std::abs(est_val - truth[k]);
        table.rows.push_back(row);
      }
    } catch (const std::exception& e) {
      table.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }

  table.aggregates = aggregate_rows(table.rows);
  return table;
}

void emit_report(const MetricsTable& m, const std::string& dir) {
  fs::create_directories(dir);

  {
    const std::string path = dir + "/metrics.csv";
    std::ofstream out(path);
    require_stream(out, path);
    out << "suite,contrast,seed,estimate,oracle,abs_bias\n";
    for (const auto& r : m.rows) {
      out << m.suite << ',' << r.contrast << ',' << r.seed << ',' << num(r.estimate) << ','
          << num(r.oracle) << ',' << num(r.abs_bias) << "\n";
    }
    out << "suite,contrast,mean_abs_bias,sd,rmse,n_seeds\n";
    for (const auto& a : m.aggregates) {
      out << m.suite << ',' << a.contrast << ',' << num(a.mean_abs_bias) << ',' << num(a.sd)
          << ',' << num(a.rmse) << ',' << a.n_seeds << "\n";
    }
  }

  {
    const std::string path = dir + "/summary.md";
    std::ofstream out(path);
    require_stream(out, path);
    out << "# Benchmark summary\n\n";
    out << "Suite: `" << m.suite << "`. Seeds with results: "
        << (m.aggregates.empty() ? 0 : m.aggregates.front().n_seeds)
        << ". Failed seeds: " << m.failures.size() << ".\n\n";
    out << "| contrast | mean abs bias | sd | RMSE | seeds |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& a : m.aggregates) {
      out << "| " << a.contrast << " | " << num(a.mean_abs_bias) << " | " << num(a.sd)
          << " | " << num(a.rmse) << " | " << a.n_seeds << " |\n";
    }
    if (!m.failures.empty()) {
      out << "\n## Failures\n\n";
      for (const auto& f : m.failures) out << "- " << f << "\n";
    }
  }

  {
    const std::string path = dir + "/rmse.svg";
    std::ofstream out(path);
    require_stream(out, path);
    const int k = static_cast<int>(m.aggregates.size());
    const int bar_w = 46;
    const int gap = 34;
    const int plot_h = 150;
    const int base_y = 180;
    const int width = 70 + std::max(k, 1) * (bar_w + gap) + 20;
    const int height = 230;
    double max_rmse = 0.0;
    for (const auto& a : m.aggregates) max_rmse = std::max(max_rmse, a.rmse);

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">RMSE by "
           "contrast ("
        << m.suite << ")</text>\n";
    out << "  <line x1=\"60\" y1=\"" << base_y << "\" x2=\"" << (width - 10) << "\" y2=\""
        << base_y << "\" stroke=\"#333\"/>\n";
    out << "  <line x1=\"60\" y1=\"" << (base_y - plot_h) << "\" x2=\"60\" y2=\"" << base_y
        << "\" stroke=\"#333\"/>\n";
    out << "  <text x=\"56\" y=\"" << (base_y - plot_h + 4)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
        << num(max_rmse) << "</text>\n";
    for (int i = 0; i < k; ++i) {
      const auto& a = m.aggregates[i];
      const int x = 70 + i * (bar_w + gap);
      const int h =
          max_rmse > 0.0 ? static_cast<int>(std::lround(plot_h * a.rmse / max_rmse)) : 0;
      out << "  <g>\n";
      out << "    <rect x=\"" << x << "\" y=\"" << (base_y - h) << "\" width=\"" << bar_w
          << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
      out << "    <text x=\"" << (x + bar_w / 2) << "\" y=\"" << (base_y - h - 4)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
          << num(a.rmse) << "</text>\n";
      out << "    <text x=\"" << (x + bar_w / 2) << "\" y=\"" << (base_y + 16)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
          << a.contrast << "</text>\n";
      out << "  </g>\n";
    }
    out << "</svg>\n";
  }
}

MetricsTable read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file: " + path);

  const std::string seed_header = "suite,contrast,seed,estimate,oracle,abs_bias";
  const std::string agg_header = "suite,contrast,mean_abs_bias,sd,rmse,n_seeds";

  std::string line;
  if (!std::getline(in, line) || trim(line) != seed_header) {
    throw IoError("metrics file does not start with the per-seed header: " + path);
  }

  MetricsTable table;
  bool in_aggregates = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line == agg_header) {
      in_aggregates = true;
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 6) throw IoError("malformed metrics row: " + line);
    try {
      if (table.suite.empty()) table.suite = cols[0];
      if (!in_aggregates) {
        SeedRow r;
        r.contrast = cols[1];
        r.seed = std::stoull(cols[2]);
        r.estimate = std::stod(cols[3]);
        r.oracle = std::stod(cols[4]);
        r.abs_bias = std::stod(cols[5]);
        table.rows.push_back(r);
      } else {
        AggRow a;
        a.contrast = cols[1];
        a.mean_abs_bias = std::stod(cols[2]);
        a.sd = std::stod(cols[3]);
        a.rmse = std::stod(cols[4]);
        a.n_seeds = std::stoi(cols[5]);
        table.aggregates.push_back(a);
      }
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      throw IoError("malformed metrics row: " + line);
    }
  }
  return table;
}

void bandwidth_sweep(const ExperimentConfig& cfg, const std::vector<double>& multipliers,
                     const std::string& dir) {
  if (multipliers.empty()) throw ConfigError("bandwidth sweep needs at least one multiplier");
  fs::create_directories(dir);
  const std::string path = dir + "/bandwidth_sweep.csv";
  std::ofstream out(path);
  require_stream(out, path);
  out << "multiplier,contrast,rmse,mean_abs_bias\n";
  for (double mult : multipliers) {
    ExperimentConfig sub = cfg;
    sub.gamma_multiplier = mult;
    const MetricsTable m = run_experiment(sub);
    emit_report(m, dir + "/multiplier_" + num(mult));
    for (const auto& a : m.aggregates) {
      out << num(mult) << ',' << a.contrast << ',' << num(a.rmse) << ','
          << num(a.mean_abs_bias) << "\n";
    }
  }
}

void scale_k_timing(const ExperimentConfig& cfg, const std::vector<int>& ks,
                    const std::string& dir) {
  if (ks.empty()) throw ConfigError("scale-K timing needs at least one policy count");
  dgp::DgpSpec spec = cfg.dgp;
  spec.seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();
  const Dataset ds = dgp::simulate(spec, cfg.n);

  fs::create_directories(dir);
  const std::string path = dir + "/scale_k.csv";
  std::ofstream out(path);
  require_stream(out, path);
  out << "k,n,seconds\n";
  for (int k : ks) {
    if (k < 2) throw ConfigError("scale-K timing needs at least 2 policies per point");
    std::vector<Policy> ps;
    for (int i = 0; i < k; ++i) {
      const double gamma = 0.3 + 0.4 * i / (k - 1);
      ps.push_back(Policy::constant_threshold("p" + std::to_string(i), gamma, ds.tau));
    }
    const ActionMatrix actions = apply_policies(ps, ds, &spec);
    embed::KernelConfig kc;
    kc.gamma_multiplier = cfg.gamma_multiplier;
    const auto start = std::chrono::steady_clock::now();
    embed::embed_policies(ds, actions, kc, 2);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    out << k << ',' << ds.n() << ',' << num(elapsed.count()) << "\n";
  }
}

}  // namespace peq::bench
