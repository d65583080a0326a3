#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "peq/dgp.hpp"
#include "peq/embed.hpp"
#include "peq/errors.hpp"
#include "peq/rng.hpp"
#include "peq/target.hpp"
#include "peq/train.hpp"
#include "peq/types.hpp"

using namespace peq;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// snap to a power-of-two grid so that adding 4.0 stays exact in binary
double dyadic(double v) { return std::round(v * 1024.0) / 1024.0; }

// two-step synthetic nuisance block with a fixed (1,1) policy schedule
struct Synthetic {
  target::NuisanceValues nv;
  target::ScaleParams sc{0.0, 1.0, 0.005};

  explicit Synthetic(int n, std::uint64_t seed) {
    Rng rng(seed);
    nv.a_obs.resize(n, 2);
    nv.y.resize(n);
    target::PolicyNuisance pn;
    pn.a_pol = Eigen::MatrixXi::Ones(n, 2);
    Eigen::VectorXd g1(n), g2(n), q1(n), q2(n);
    for (int u = 0; u < n; ++u) {
      nv.a_obs(u, 0) = rng.bernoulli(0.6) ? 1 : 0;
      nv.a_obs(u, 1) = rng.bernoulli(0.55) ? 1 : 0;
      nv.y(u) = dyadic(rng.uniform());
      g1(u) = dyadic(0.3 + 0.4 * rng.uniform());
      g2(u) = dyadic(0.3 + 0.4 * rng.uniform());
      q1(u) = dyadic(0.2 + 0.6 * rng.uniform());
      q2(u) = dyadic(0.2 + 0.6 * rng.uniform());
    }
    pn.g = {g1, g2};
    pn.q_cf = {q1, q2};
    pn.q_obs = pn.q_cf;
    nv.policy.push_back(std::move(pn));
  }
};

target::NuisanceValues shifted(const target::NuisanceValues& nv, double c) {
  target::NuisanceValues out = nv;
  out.y.array() += c;
  for (auto& pn : out.policy) {
    for (auto& q : pn.q_obs) q.array() += c;
    for (auto& q : pn.q_cf) q.array() += c;
  }
  return out;
}

target::NuisanceValues resample(const target::NuisanceValues& nv, Rng& rng) {
  const Eigen::Index n = nv.y.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& v : idx) v = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  target::NuisanceValues out;
  out.a_obs.resize(n, nv.a_obs.cols());
  out.y.resize(n);
  for (Eigen::Index u = 0; u < n; ++u) {
    out.a_obs.row(u) = nv.a_obs.row(idx[static_cast<std::size_t>(u)]);
    out.y(u) = nv.y(idx[static_cast<std::size_t>(u)]);
  }
  for (const auto& pn : nv.policy) {
    target::PolicyNuisance rp;
    rp.a_pol.resize(n, pn.a_pol.cols());
    for (Eigen::Index u = 0; u < n; ++u)
      rp.a_pol.row(u) = pn.a_pol.row(idx[static_cast<std::size_t>(u)]);
    const auto take = [&](const std::vector<Eigen::VectorXd>& src) {
      std::vector<Eigen::VectorXd> dst;
      for (const auto& col : src) {
        Eigen::VectorXd v(n);
        for (Eigen::Index u = 0; u < n; ++u) v(u) = col(idx[static_cast<std::size_t>(u)]);
        dst.push_back(std::move(v));
      }
      return dst;
    };
    rp.g = take(pn.g);
    rp.q_obs = take(pn.q_obs);
    rp.q_cf = take(pn.q_cf);
    out.policy.push_back(std::move(rp));
  }
  return out;
}

Dataset limited_cohort(int tau, int n, std::uint64_t seed) {
  dgp::DgpSpec spec;
  spec.variant = dgp::Variant::limited;
  spec.tau = tau;
  spec.seed = seed;
  return dgp::simulate(spec, n);
}

}  // namespace

TEST_SUITE("target") {
  TEST_CASE("outcome scaling maps the range onto the margin interval and inverts exactly") {
    Dataset ds = limited_cohort(3, 200, 1);
    target::ScaleParams sc = target::fit_scale(ds);
    CHECK(sc.scale(sc.y_min) == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(sc.scale(sc.y_max) == doctest::Approx(0.995).epsilon(1e-12));
    for (const auto& tr : ds.trajectories) {
      const double s = sc.scale(tr.outcome);
      CHECK(s >= 0.005);
      CHECK(s <= 0.995);
      CHECK(sc.unscale(s) == doctest::Approx(tr.outcome).epsilon(1e-12));
    }

    for (auto& tr : const_cast<std::vector<Trajectory>&>(ds.trajectories)) tr.outcome = 2.0;
    CHECK_THROWS_AS(target::fit_scale(ds), DegenerateSupportError);
  }

  TEST_CASE("a constant outcome shift moves the estimate by exactly that constant") {
    // dyadic values and a power-of-two shift keep both scaled problems bitwise equal
    Synthetic syn(150, 7);
    const double c = 4.0;
    target::ScaleParams sc_shift{syn.sc.y_min + c, syn.sc.y_max + c, syn.sc.margin};
    target::EstimateReport base =
        target::estimate_from_values(syn.nv, {"p"}, syn.sc, 0.01, target::ClipBounds{});
    target::EstimateReport moved =
        target::estimate_from_values(shifted(syn.nv, c), {"p"}, sc_shift, 0.01,
                                     target::ClipBounds{});
    CHECK(moved.policies[0].psi - base.policies[0].psi == doctest::Approx(c).epsilon(1e-12));
    for (std::size_t t = 0; t < 2; ++t)
      CHECK(moved.policies[0].epsilon[t] == base.policies[0].epsilon[t]);
    CHECK((moved.policies[0].ic - base.policies[0].ic).cwiseAbs().maxCoeff() == 0.0);
    CHECK(moved.policies[0].se == base.policies[0].se);
  }

  TEST_CASE("fluctuation solver honors the score equation and penalty shrinkage") {
    Rng rng(13);
    const int n = 200;
    Eigen::VectorXd z(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
      z(i) = rng.normal();
      y(i) = 0.1 + 0.8 * rng.uniform();
      w(i) = rng.bernoulli(0.8) ? 1.0 / (0.2 + 0.7 * rng.uniform()) : 0.0;
    }

    // an exactly fitted model needs no update beyond solver resolution
    Eigen::VectorXd y_fit(n);
    for (int i = 0; i < n; ++i) y_fit(i) = sigmoid(z(i));
    CHECK(std::abs(target::solve_fluctuation(z, y_fit, w, 0.0)) < 1e-5);

    // overwhelming penalty pins the update at zero
    CHECK(target::solve_fluctuation(z, y, w, 1e6) == 0.0);

    const double eps0 = target::solve_fluctuation(z, y, w, 0.0);
    CHECK(std::abs(eps0) <= 5.0);
    double score = 0.0;
    for (int i = 0; i < n; ++i) score += w(i) * (sigmoid(z(i) + eps0) - y(i));
    score /= n;
    CHECK(std::abs(score) < 1e-8);

    double prev = std::abs(eps0);
    for (double lambda : {1e-3, 1e-2, 1e-1, 1.0}) {
      const double eps = target::solve_fluctuation(z, y, w, lambda);
      CHECK(std::abs(eps) <= prev + 1e-12);
      prev = std::abs(eps);
    }

    CHECK_THROWS_AS(target::solve_fluctuation(z, y, Eigen::VectorXd::Zero(n), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(target::solve_fluctuation(z, y.head(5), w, 0.0), ShapeError);
    CHECK_THROWS_AS(target::solve_fluctuation(z, y, w, -1.0), std::invalid_argument);
  }

  TEST_CASE("targeting solves every stepwise score equation at zero penalty") {
    Synthetic syn(400, 21);
    const target::ClipBounds clip;
    target::PolicyEstimate est =
        target::ltmle(syn.nv.policy[0], syn.nv.a_obs, syn.nv.y, syn.sc, 0.0, clip);
    REQUIRE(est.epsilon.size() == 2);

    // replay the backward pass with the published epsilons
    const int n = 400;
    Eigen::MatrixXd w(n, 2);
    Eigen::VectorXd cur = Eigen::VectorXd::Ones(n);
    for (int t = 1; t <= 2; ++t) {
      for (int u = 0; u < n; ++u) {
        const int ap = syn.nv.policy[0].a_pol(u, t - 1);
        double eta = ap == 1 ? syn.nv.policy[0].g[static_cast<std::size_t>(t - 1)](u)
                             : 1.0 - syn.nv.policy[0].g[static_cast<std::size_t>(t - 1)](u);
        eta = std::clamp(eta, clip.lo, clip.hi);
        cur(u) *= (syn.nv.a_obs(u, t - 1) == ap ? 1.0 : 0.0) / eta;
      }
      w.col(t - 1) = cur;
      CHECK(cur.minCoeff() >= 0.0);
      CHECK(cur.maxCoeff() <= 1.0 / (clip.lo * clip.lo) + 1e-9);
    }

    std::vector<Eigen::VectorXd> q_up(2);
    Eigen::VectorXd targ(n);
    for (int u = 0; u < n; ++u) targ(u) = syn.sc.scale(syn.nv.y(u));
    const Eigen::VectorXd y_scaled = targ;
    for (int t = 2; t >= 1; --t) {
      Eigen::VectorXd z(n);
      for (int u = 0; u < n; ++u)
        z(u) = logit(std::clamp(syn.sc.scale(syn.nv.policy[0].q_cf[static_cast<std::size_t>(t - 1)](u)),
                                1e-6, 1.0 - 1e-6));
      const double eps = est.epsilon[static_cast<std::size_t>(t - 1)];
      double score = 0.0;
      Eigen::VectorXd up(n);
      for (int u = 0; u < n; ++u) {
        up(u) = sigmoid(z(u) + eps);
        score += w(u, t - 1) * (up(u) - targ(u));
      }
      CHECK(std::abs(score / n) < 1e-8);
      q_up[static_cast<std::size_t>(t - 1)] = up;
      targ = up;
    }

    CHECK(est.psi == doctest::Approx(syn.sc.unscale(q_up[0].mean())).epsilon(1e-12));

    Eigen::VectorXd ic_scaled = w.col(0).cwiseProduct(q_up[1] - q_up[0]) +
                                w.col(1).cwiseProduct(y_scaled - q_up[1]) + q_up[0];
    ic_scaled.array() -= q_up[0].mean();
    CHECK((est.ic - ic_scaled / syn.sc.factor()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(est.ic.mean() * syn.sc.factor()) < 1e-6);

    const double sd = std::sqrt((est.ic.array() - est.ic.mean()).square().sum() / (n - 1));
    CHECK(est.se == doctest::Approx(sd / std::sqrt(static_cast<double>(n))).epsilon(1e-12));
    CHECK(est.ci_lo == doctest::Approx(est.psi - 1.96 * est.se).epsilon(1e-12));
    CHECK(est.ci_hi == doctest::Approx(est.psi + 1.96 * est.se).epsilon(1e-12));
  }

  TEST_CASE("influence values vanish on a constant outcome") {
    const int n = 80;
    target::NuisanceValues nv;
    nv.a_obs = Eigen::MatrixXi::Ones(n, 2);
    nv.y = Eigen::VectorXd::Constant(n, 0.4);
    target::PolicyNuisance pn;
    pn.a_pol = Eigen::MatrixXi::Ones(n, 2);
    pn.g = {Eigen::VectorXd::Constant(n, 0.6), Eigen::VectorXd::Constant(n, 0.5)};
    pn.q_cf = {Eigen::VectorXd::Constant(n, 0.4), Eigen::VectorXd::Constant(n, 0.4)};
    pn.q_obs = pn.q_cf;
    nv.policy.push_back(pn);
    const target::ScaleParams sc{-0.1, 0.9, 0.005};
    target::PolicyEstimate est = target::ltmle(nv.policy[0], nv.a_obs, nv.y, sc, 0.0,
                                               target::ClipBounds{});
    CHECK(est.psi == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(est.ic.cwiseAbs().maxCoeff() < 1e-5);
    CHECK(est.se < 1e-5);
    for (double e : est.epsilon) CHECK(std::abs(e) < 1e-5);
  }

  TEST_CASE("an overwhelming penalty reduces the estimate to the plug-in mean") {
    Synthetic syn(120, 33);
    target::PolicyEstimate est = target::ltmle(syn.nv.policy[0], syn.nv.a_obs, syn.nv.y,
                                               syn.sc, 1e9, target::ClipBounds{});
    for (double e : est.epsilon) CHECK(e == 0.0);
    CHECK(est.psi == doctest::Approx(syn.nv.policy[0].q_cf[0].mean()).epsilon(1e-10));
  }

  TEST_CASE("no trajectory following the policy prefix is a hard error") {
    const int n = 30;
    target::NuisanceValues nv;
    nv.a_obs = Eigen::MatrixXi::Zero(n, 2);
    nv.y = Eigen::VectorXd::Constant(n, 0.2);
    target::PolicyNuisance pn;
    pn.a_pol = Eigen::MatrixXi::Ones(n, 2);
    pn.g = {Eigen::VectorXd::Constant(n, 0.5), Eigen::VectorXd::Constant(n, 0.5)};
    pn.q_cf = {Eigen::VectorXd::Constant(n, 0.3), Eigen::VectorXd::Constant(n, 0.3)};
    pn.q_obs = pn.q_cf;
    nv.policy.push_back(pn);
    const target::ScaleParams sc{0.0, 1.0, 0.005};
    try {
      target::ltmle(nv.policy[0], nv.a_obs, nv.y, sc, 0.0, target::ClipBounds{});
      FAIL("expected a degenerate-support error");
    } catch (const DegenerateSupportError& e) {
      CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
  }

  TEST_CASE("duplicate policies produce a zero contrast with zero uncertainty") {
    Synthetic syn(100, 41);
    syn.nv.policy.push_back(syn.nv.policy[0]);
    target::EstimateReport report =
        target::estimate_from_values(syn.nv, {"a", "b"}, syn.sc, 0.01, target::ClipBounds{});
    REQUIRE(report.contrasts.size() == 2);
    for (const auto& c : report.contrasts) {
      CHECK(c.cate == 0.0);
      CHECK(c.ic.cwiseAbs().maxCoeff() == 0.0);
      CHECK(c.se == 0.0);
    }
  }

  TEST_CASE("contrasts are antisymmetric and labeled in order") {
    Synthetic syn(90, 43);
    Synthetic other(90, 44);
    syn.nv.policy.push_back(other.nv.policy[0]);
    target::EstimateReport report =
        target::estimate_from_values(syn.nv, {"a"}, syn.sc, 0.01, target::ClipBounds{});
    CHECK(report.policies[0].label == "a");
    CHECK(report.policies[1].label == "policy_1");
    REQUIRE(report.contrasts.size() == 2);
    const auto& ij = report.contrasts[0];
    const auto& ji = report.contrasts[1];
    CHECK(ij.cate == -ji.cate);
    CHECK(ij.cate == report.policies[0].psi - report.policies[1].psi);
    CHECK(ij.se == ji.se);
  }

  TEST_CASE("tiny-cohort estimates with oracle nuisances cover the exact targets") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::tiny;
    spec.seed = 5;
    Dataset ds = dgp::simulate(spec, 5000);
    std::vector<Policy> ps;
    ps.push_back(Policy::fixed("always", {1, 1}));
    ps.push_back(Policy::fixed("never", {0, 0}));
    ActionMatrix am = apply_policies(ps, ds);
    target::NuisanceValues nv = target::tiny_oracle_values(spec, ds, ps, am);
    target::EstimateReport report = target::estimate_from_values(
        nv, {"always", "never"}, target::fit_scale(ds), 0.0, target::ClipBounds{});
    CHECK(std::abs(report.policies[0].psi - 0.559) <= 3.0 * report.policies[0].se);
    CHECK(std::abs(report.policies[1].psi - 0.244) <= 3.0 * report.policies[1].se);
    for (const auto& c : report.contrasts)
      if (c.i == 0 && c.j == 1)
        CHECK(std::abs(c.cate - 0.31500000000000006) <= 3.0 * c.se);
  }

  TEST_CASE("estimated uncertainty agrees with a bootstrap replication") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::tiny;
    spec.seed = 9;
    Dataset ds = dgp::simulate(spec, 2000);
    std::vector<Policy> ps;
    ps.push_back(Policy::fixed("always", {1, 1}));
    ActionMatrix am = apply_policies(ps, ds);
    target::NuisanceValues nv = target::tiny_oracle_values(spec, ds, ps, am);
    const target::ScaleParams sc = target::fit_scale(ds);
    target::EstimateReport report =
        target::estimate_from_values(nv, {"always"}, sc, 0.0, target::ClipBounds{});

    Rng rng(0xB00F);
    std::vector<double> psis;
    for (int rep = 0; rep < 200; ++rep) {
      target::NuisanceValues re = resample(nv, rng);
      target::EstimateReport r =
          target::estimate_from_values(re, {"always"}, sc, 0.0, target::ClipBounds{});
      psis.push_back(r.policies[0].psi);
    }
    double mean = 0.0;
    for (double p : psis) mean += p;
    mean /= static_cast<double>(psis.size());
    double var = 0.0;
    for (double p : psis) var += (p - mean) * (p - mean);
    var /= static_cast<double>(psis.size() - 1);
    const double ratio = report.policies[0].se / std::sqrt(var);
    CHECK(ratio > 0.7);
    CHECK(ratio < 1.3);
  }

  TEST_CASE("ice recursion on the exact tables equals direct enumeration") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::tiny;
    for (int a1 = 0; a1 <= 1; ++a1)
      for (int a2 = 0; a2 <= 1; ++a2) {
        Policy p = Policy::fixed("p", {a1, a2});
        CHECK(target::tiny_ice_capo(spec, p) ==
              doctest::Approx(dgp::tiny_exhaustive_capo(spec, p)).epsilon(1e-12));
      }
    CHECK(target::tiny_ice_capo(spec, Policy::fixed("always", {1, 1})) ==
          doctest::Approx(0.559).epsilon(1e-13));

    dgp::DgpSpec wrong;
    wrong.variant = dgp::Variant::limited;
    CHECK_THROWS_AS(target::tiny_ice_capo(wrong, Policy::fixed("p", {1, 1})),
                    std::invalid_argument);
    CHECK_THROWS_AS(target::tiny_ice_capo(spec, Policy::constant_threshold("t", 0.5, 2)),
                    std::invalid_argument);
  }

  TEST_CASE("estimate csv lists policies then contrasts") {
    Synthetic syn(50, 61);
    syn.nv.policy.push_back(syn.nv.policy[0]);
    target::EstimateReport report =
        target::estimate_from_values(syn.nv, {"a", "b"}, syn.sc, 0.01, target::ClipBounds{});
    const std::string path = "/tmp/peq_estimates_test.csv";
    target::write_estimates_csv(path, report);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "label,psi_hat,se,ci_lo,ci_hi,epsilon_1,epsilon_2");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    in.close();
    std::remove(path.c_str());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("a,", 0) == 0);
    CHECK(rows[1].rfind("b,", 0) == 0);
    CHECK(rows[2].rfind("a-b,", 0) == 0);
    CHECK(rows[3].rfind("b-a,", 0) == 0);
  }

  TEST_CASE("remainder terms vanish where the theory forces them") {
    Dataset ds = limited_cohort(3, 100, 71);
    std::vector<Policy> ps;
    ps.push_back(Policy::fixed("always", {1, 1, 1}));
    ps.push_back(Policy::fixed("never", {0, 0, 0}));
    ps.push_back(Policy::fixed("always_copy", {1, 1, 1}));
    ActionMatrix am = apply_policies(ps, ds);
    embed::PolicyEmbedding emb = embed::deterministic_bypass(ps, 3);
    train::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 25;
    cfg.hidden = 6;
    cfg.tail_hidden = 4;
    cfg.seed = 3;
    train::TrainedEstimator est = train::train_peq(ds, ps, am, emb, cfg);

    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 3;
    spec.seed = 71;
    target::RemainderDiagnostic diag = target::remainder_diagnostic(
        spec, ds, est, am, {{0, 1}, {0, 2}}, 40, 99, target::ClipBounds{},
        embed::KernelConfig{});
    REQUIRE(diag.pairs.size() == 2);

    for (const auto& pair : diag.pairs) {
      REQUIRE(pair.term1.size() == 2);
      for (double v : pair.term2) CHECK(v == 0.0);  // shared behavior model
      CHECK(pair.sum2 == 0.0);
      double s1 = 0.0, s3 = 0.0;
      for (double v : pair.term1) {
        CHECK(std::isfinite(v));
        s1 += v;
      }
      for (double v : pair.term3) s3 += v;
      CHECK(pair.sum1 == doctest::Approx(s1).epsilon(1e-12));
      CHECK(pair.sum3 == doctest::Approx(s3).epsilon(1e-12));
      CHECK(pair.total == doctest::Approx(pair.sum1 + pair.sum2 + pair.sum3).epsilon(1e-12));
    }

    const auto& dup = diag.pairs[1];
    for (double v : dup.term1) CHECK(v == 0.0);
    for (double v : dup.term3) CHECK(v == 0.0);
    CHECK(dup.traj_mmd == 0.0);
    CHECK(diag.pairs[0].traj_mmd > 0.0);

    const std::string path = "/tmp/peq_diag_test.csv";
    target::write_diagnostics_csv(path, diag);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "pair,t,term1,term2,term3,traj_mmd");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    in.close();
    std::remove(path.c_str());
    CHECK(rows == 4);  // 2 pairs x 2 steps
  }

  TEST_CASE("independent training of identical policies leaves a nonzero remainder") {
    Dataset ds = limited_cohort(3, 100, 73);
    std::vector<Policy> ps;
    ps.push_back(Policy::fixed("always", {1, 1, 1}));
    ps.push_back(Policy::fixed("always_copy", {1, 1, 1}));
    ActionMatrix am = apply_policies(ps, ds);
    train::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 25;
    cfg.hidden = 6;
    cfg.tail_hidden = 4;
    cfg.seed = 5;
    train::TrainedEstimator est = train::train_separate(ds, ps, am, cfg);

    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 3;
    spec.seed = 73;
    target::RemainderDiagnostic diag = target::remainder_diagnostic(
        spec, ds, est, am, {{0, 1}}, 40, 99, target::ClipBounds{}, embed::KernelConfig{});
    REQUIRE(diag.pairs.size() == 1);
    double max1 = 0.0, max3 = 0.0;
    for (double v : diag.pairs[0].term1) max1 = std::max(max1, std::abs(v));
    for (double v : diag.pairs[0].term3) max3 = std::max(max3, std::abs(v));
    CHECK(max1 > 1e-12);
    CHECK(max3 > 1e-12);
    CHECK(diag.pairs[0].traj_mmd == 0.0);  // identical schedules, nonzero remainder
  }

  TEST_CASE("diagnostic preconditions are enforced") {
    Dataset ds = limited_cohort(3, 30, 75);
    std::vector<Policy> ps;
    ps.push_back(Policy::fixed("always", {1, 1, 1}));
    ps.push_back(Policy::fixed("never", {0, 0, 0}));
    ActionMatrix am = apply_policies(ps, ds);
    embed::PolicyEmbedding emb = embed::deterministic_bypass(ps, 3);
    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 15;
    cfg.hidden = 4;
    cfg.tail_hidden = 3;
    train::TrainedEstimator est = train::train_peq(ds, ps, am, emb, cfg);

    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 3;
    spec.seed = 75;

    dgp::DgpSpec too_long = spec;
    too_long.tau = 5;
    CHECK_THROWS_AS(target::remainder_diagnostic(too_long, ds, est, am, {{0, 1}}, 10, 1,
                                                 target::ClipBounds{}, embed::KernelConfig{}),
                    ConfigError);

    dgp::DgpSpec tiny;
    tiny.variant = dgp::Variant::tiny;
    CHECK_THROWS_AS(target::remainder_diagnostic(tiny, ds, est, am, {{0, 1}}, 10, 1,
                                                 target::ClipBounds{}, embed::KernelConfig{}),
                    ConfigError);

    CHECK_THROWS_AS(target::remainder_diagnostic(spec, ds, est, am, {{0, 1}}, 0, 1,
                                                 target::ClipBounds{}, embed::KernelConfig{}),
                    ConfigError);

    CHECK_THROWS_AS(target::remainder_diagnostic(spec, ds, est, am, {{0, 5}}, 10, 1,
                                                 target::ClipBounds{}, embed::KernelConfig{}),
                    std::out_of_range);
  }
}
