#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "peq/dgp.hpp"
#include "peq/errors.hpp"
#include "peq/rng.hpp"
#include "peq/types.hpp"

using namespace peq;

namespace {

dgp::DgpSpec limited_spec(int tau, std::uint64_t seed) {
  dgp::DgpSpec s;
  s.variant = dgp::Variant::limited;
  s.tau = tau;
  s.seed = seed;
  return s;
}

dgp::DgpSpec tiny_spec(std::uint64_t seed) {
  dgp::DgpSpec s;
  s.variant = dgp::Variant::tiny;
  s.seed = seed;
  return s;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.n() != b.n() || a.tau != b.tau || a.d_l != b.d_l) return false;
  for (int i = 0; i < a.n(); ++i) {
    const auto& x = a.trajectories[static_cast<std::size_t>(i)];
    const auto& y = b.trajectories[static_cast<std::size_t>(i)];
    if (x.actions != y.actions || x.outcome != y.outcome) return false;
    if ((x.covariates - y.covariates).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("dgp") {
  TEST_CASE("seeded simulation is reproducible") {
    dgp::DgpSpec spec = limited_spec(6, 42);
    CHECK(datasets_equal(dgp::simulate(spec, 50), dgp::simulate(spec, 50)));
    spec.seed = 43;
    CHECK_FALSE(datasets_equal(dgp::simulate(limited_spec(6, 42), 50), dgp::simulate(spec, 50)));
  }

  TEST_CASE("limited cohort has the documented shape") {
    Dataset ds = dgp::simulate(limited_spec(15, 1), 1000);
    CHECK(ds.n() == 1000);
    CHECK(ds.tau == 15);
    CHECK(ds.d_l == 11);
  }

  TEST_CASE("zero covariates and zero noise give the closed-form outcome path") {
    dgp::DgpSpec spec = limited_spec(15, 7);
    spec.x_scale = 0.0;
    spec.noise_sd_y = 0.0;
    Dataset ds = dgp::simulate(spec, 3);
    // Y_t = 5 tanh(1) sum_{i<=min(h,t-1)} (-1)^i/i; frozen reference values
    const double y2 = -3.8079707797788243;
    const double y_plateau = -2.4162481257406108;
    for (const auto& tr : ds.trajectories) {
      CHECK(tr.covariates(0, 10) == 0.0);  // Y_0
      CHECK(tr.covariates(1, 10) == 0.0);  // Y_1, empty lag sum
      CHECK(tr.covariates(2, 10) == doctest::Approx(y2).epsilon(1e-13));
      CHECK(tr.outcome == doctest::Approx(y_plateau).epsilon(1e-13));
    }
  }

  TEST_CASE("action-feedback switch decouples the appended process") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::expanded;
    spec.tau = 6;
    spec.seed = 9;
    spec.omega = {0.37, 0.0, 0.29};
    dgp::DgpSpec loud = spec;
    loud.noise_sd_a = 25.0;

    Dataset quiet_ds = dgp::simulate(spec, 40);
    Dataset loud_ds = dgp::simulate(loud, 40);

    bool actions_differ = false;
    double z_gap = 0.0;
    for (int i = 0; i < 40; ++i) {
      const auto& x = quiet_ds.trajectories[static_cast<std::size_t>(i)];
      const auto& y = loud_ds.trajectories[static_cast<std::size_t>(i)];
      actions_differ = actions_differ || x.actions != y.actions;
      z_gap = std::max(z_gap, (x.covariates.block(0, 10, 6, 5) -
                               y.covariates.block(0, 10, 6, 5))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    CHECK(actions_differ);
    CHECK(z_gap == 0.0);

    // with the feedback weight restored, the same perturbation reaches Z
    spec.omega = {0.37, 0.42, 0.29};
    loud = spec;
    loud.noise_sd_a = 25.0;
    quiet_ds = dgp::simulate(spec, 40);
    loud_ds = dgp::simulate(loud, 40);
    z_gap = 0.0;
    for (int i = 0; i < 40; ++i) {
      z_gap = std::max(z_gap,
                       (quiet_ds.trajectories[static_cast<std::size_t>(i)].covariates.block(0, 10, 6, 5) -
                        loud_ds.trajectories[static_cast<std::size_t>(i)].covariates.block(0, 10, 6, 5))
                           .cwiseAbs()
                           .maxCoeff());
    }
    CHECK(z_gap > 0.0);
  }

  TEST_CASE("tiny cohort is binary with two steps") {
    Dataset ds = dgp::simulate(tiny_spec(3), 200);
    CHECK(ds.tau == 2);
    CHECK(ds.d_l == 1);
    for (const auto& tr : ds.trajectories) {
      for (int t = 0; t < 2; ++t) {
        const double l = tr.covariates(t, 0);
        CHECK((l == 0.0 || l == 1.0));
        CHECK((tr.actions[static_cast<std::size_t>(t)] == 0 ||
               tr.actions[static_cast<std::size_t>(t)] == 1));
      }
      CHECK((tr.outcome == 0.0 || tr.outcome == 1.0));
    }
  }

  TEST_CASE("tiny propensity reads back the tables") {
    dgp::DgpSpec spec = tiny_spec(0);
    Trajectory tr;
    tr.covariates.resize(2, 1);
    tr.actions = {0, 0};
    for (int l1 = 0; l1 <= 1; ++l1) {
      for (int a1 = 0; a1 <= 1; ++a1) {
        for (int l2 = 0; l2 <= 1; ++l2) {
          tr.covariates(0, 0) = l1;
          tr.covariates(1, 0) = l2;
          tr.actions[0] = a1;
          CHECK(dgp::oracle_propensity(spec, HistoryView(tr, 1)) == spec.tiny.p_a1[l1]);
          CHECK(dgp::oracle_propensity(spec, HistoryView(tr, 2)) ==
                spec.tiny.p_a2[l1][a1][l2]);
        }
      }
    }
  }

  TEST_CASE("exhaustive tiny effects match the frozen references") {
    dgp::DgpSpec spec = tiny_spec(0);
    const auto capo = [&](int a1, int a2) {
      return dgp::tiny_exhaustive_capo(spec, Policy::fixed("p", {a1, a2}));
    };
    CHECK(capo(1, 1) == doctest::Approx(0.559).epsilon(1e-13));
    CHECK(capo(0, 0) == doctest::Approx(0.244).epsilon(1e-13));
    CHECK(capo(1, 0) == doctest::Approx(0.609).epsilon(1e-13));
    CHECK(capo(0, 1) == doctest::Approx(0.44400000000000006).epsilon(1e-13));
  }

  TEST_CASE("exhaustive and monte-carlo tiny values agree within sampling error") {
    dgp::DgpSpec spec = tiny_spec(0);
    Policy p = Policy::fixed("always", {1, 1});
    const double exact = dgp::tiny_exhaustive_capo(spec, p);
    Rng rng(0x7e57);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += dgp::tiny_rollout_outcome(spec, p, rng);
    const double mc = sum / n;
    const double se = std::sqrt(exact * (1.0 - exact) / n);
    CHECK(std::abs(mc - exact) < 3.0 * se);
  }

  TEST_CASE("tiny oracle capo reports the exhaustive method") {
    dgp::DgpSpec spec = tiny_spec(0);
    dgp::OracleResult r = dgp::oracle_capo(spec, Policy::fixed("p", {1, 0}), 10, 1);
    CHECK(r.exhaustive);
    CHECK(r.mc_std_error == 0.0);
    CHECK(r.value == doctest::Approx(0.609).epsilon(1e-13));
  }

  TEST_CASE("propensity is half exactly when the score vanishes") {
    dgp::DgpSpec spec = limited_spec(8, 0);
    Trajectory tr;
    tr.covariates.setZero(8, 11);
    tr.actions.assign(8, 1);
    // at t=2 the score is -(xbar_1 + tanh(y_1/2)) - tanh(-3); choosing
    // xbar_1 = tanh(3) with y_1 = 0 cancels it exactly
    tr.covariates.row(0).head(10).setConstant(std::tanh(3.0));
    CHECK(dgp::behavior_score(spec, tr, 2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(dgp::oracle_propensity(spec, HistoryView(tr, 2)) == doctest::Approx(0.5).epsilon(1e-15));

    // a strongly positive score saturates the propensity
    tr.covariates.row(0).head(10).setConstant(-1000.0);
    CHECK(dgp::oracle_propensity(spec, HistoryView(tr, 2)) > 1.0 - 1e-12);
  }

  TEST_CASE("propensity matches realized treatment frequencies") {
    dgp::DgpSpec spec = limited_spec(4, 123);
    Dataset ds = dgp::simulate(spec, 20000);
    // bin step-2 histories by their oracle propensity and compare frequencies
    std::map<int, std::pair<double, int>> bins;  // bin -> (sum prop, count), treated count below
    std::map<int, int> treated;
    for (const auto& tr : ds.trajectories) {
      const double prop = dgp::oracle_propensity(spec, HistoryView(tr, 2));
      const int bin = static_cast<int>(prop * 10.0);
      bins[bin].first += prop;
      bins[bin].second += 1;
      treated[bin] += tr.actions[1];
    }
    int checked = 0;
    for (const auto& [bin, agg] : bins) {
      const int m = agg.second;
      if (m < 500) continue;
      const double mean_prop = agg.first / m;
      const double freq = static_cast<double>(treated[bin]) / m;
      const double band = 3.0 * std::sqrt(mean_prop * (1.0 - mean_prop) / m) + 0.05;
      CHECK(std::abs(freq - mean_prop) < band);
      ++checked;
    }
    CHECK(checked >= 2);
  }

  TEST_CASE("identical policies with shared draws give identical oracle values") {
    dgp::DgpSpec spec = limited_spec(5, 2);
    Policy p = Policy::fixed("a", {1, 0, 1, 0, 1});
    Policy q = Policy::fixed("b", {1, 0, 1, 0, 1});
    dgp::OracleResult ri = dgp::oracle_capo(spec, p, 2000, 77);
    dgp::OracleResult rj = dgp::oracle_capo(spec, q, 2000, 77);
    CHECK(ri.value == rj.value);
    CHECK(ri.mc_std_error == rj.mc_std_error);
    CHECK(dgp::oracle_cate(spec, p, q, 2000, 77).value == 0.0);
  }

  TEST_CASE("monte-carlo standard error shrinks at the root-n rate") {
    dgp::DgpSpec spec = limited_spec(5, 2);
    Policy p = Policy::fixed("a", {1, 1, 0, 0, 1});
    const double se1 = dgp::oracle_capo(spec, p, 4000, 5).mc_std_error;
    const double se4 = dgp::oracle_capo(spec, p, 16000, 5).mc_std_error;
    CHECK(se1 / se4 > 1.6);
    CHECK(se1 / se4 < 2.4);
  }

  TEST_CASE("paired contrast is antisymmetric") {
    dgp::DgpSpec spec = limited_spec(4, 6);
    Policy p = Policy::fixed("a", {1, 1, 1, 1});
    Policy q = Policy::fixed("b", {0, 0, 0, 0});
    dgp::OracleResult ij = dgp::oracle_cate(spec, p, q, 3000, 9);
    dgp::OracleResult ji = dgp::oracle_cate(spec, q, p, 3000, 9);
    CHECK(ij.value == -ji.value);
    CHECK(ij.value != 0.0);
  }

  TEST_CASE("tiny contrast matches the frozen difference") {
    dgp::DgpSpec spec = tiny_spec(0);
    dgp::OracleResult r =
        dgp::oracle_cate(spec, Policy::fixed("a", {1, 1}), Policy::fixed("b", {0, 0}), 10, 1);
    CHECK(r.exhaustive);
    CHECK(r.value == doctest::Approx(0.31500000000000006).epsilon(1e-13));
  }

  TEST_CASE("tiny observational mean matches the table expectation") {
    const int n = 100000;
    Dataset ds = dgp::simulate(tiny_spec(15), n);
    double mean = 0.0;
    for (const auto& tr : ds.trajectories) mean += tr.outcome;
    mean /= n;
    const double truth = 0.44368499999999994;
    CHECK(std::abs(mean - truth) < 3.0 * std::sqrt(truth * (1.0 - truth) / n));
  }

  TEST_CASE("oracle value is the mean of forced rollouts") {
    dgp::DgpSpec spec = limited_spec(4, 6);
    Policy p = Policy::fixed("a", {1, 0, 0, 1});
    const std::int64_t n_mc = 500;
    const std::uint64_t seed = 99;
    double sum = 0.0;
    for (std::int64_t i = 0; i < n_mc; ++i) {
      Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
      sum += dgp::rollout_final_outcome(spec, p, rng);
    }
    dgp::OracleResult r = dgp::oracle_capo(spec, p, n_mc, seed);
    CHECK(r.value == doctest::Approx(sum / n_mc).epsilon(1e-12));
    CHECK(r.n_mc == n_mc);
    CHECK_FALSE(r.exhaustive);
  }

  TEST_CASE("resumed rollouts continue the observed prefix") {
    dgp::DgpSpec spec = limited_spec(4, 12);
    Dataset ds = dgp::simulate(spec, 5);
    Policy p = Policy::fixed("always", {1, 1, 1, 1});
    for (const auto& tr : ds.trajectories) {
      dgp::ResumeState st = dgp::reconstruct_state(spec, tr, 2);
      CHECK(st.s == 2);
      CHECK(st.a[1] == tr.actions[0]);
      CHECK(st.a[2] == tr.actions[1]);
      Rng rng(5);
      const double y = dgp::rollout_from(spec, st, p, rng);
      CHECK(std::isfinite(y));
    }
  }

  TEST_CASE("spec validation rejects bad dimensions") {
    dgp::DgpSpec spec = limited_spec(1, 0);
    CHECK_THROWS_AS(dgp::validate(spec), ConfigError);
    spec = limited_spec(5, 0);
    spec.lag = 0;
    CHECK_THROWS_AS(dgp::validate(spec), ConfigError);
    spec = limited_spec(5, 0);
    spec.noise_sd_y = -1.0;
    CHECK_THROWS_AS(dgp::validate(spec), ConfigError);
  }
}
