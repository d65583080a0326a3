#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peq/dataset_io.hpp"
#include "peq/dgp.hpp"
#include "peq/errors.hpp"
#include "peq/types.hpp"

using namespace peq;

namespace {

Trajectory make_traj(int tau, int d_l, double base) {
  Trajectory tr;
  tr.id = "t";
  tr.covariates.resize(tau, d_l);
  for (int t = 0; t < tau; ++t)
    for (int j = 0; j < d_l; ++j) tr.covariates(t, j) = base + t + 0.1 * j;
  tr.actions.assign(static_cast<std::size_t>(tau), 0);
  for (int t = 0; t < tau; t += 2) tr.actions[static_cast<std::size_t>(t)] = 1;
  tr.outcome = base;
  return tr;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) : path("/tmp/peq_core_" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("dataset construction echoes shapes") {
    std::vector<Trajectory> trs{make_traj(2, 1, 0.0), make_traj(2, 1, 1.0)};
    Dataset ds = make_dataset(trs);
    CHECK(ds.n() == 2);
    CHECK(ds.tau == 2);
    CHECK(ds.d_l == 1);
    CHECK(ds.outcome_bounds.first == 0.0);
    CHECK(ds.outcome_bounds.second == 1.0);
  }

  TEST_CASE("inconsistent action length is rejected") {
    std::vector<Trajectory> trs{make_traj(15, 2, 0.0), make_traj(15, 2, 1.0)};
    trs[1].actions.pop_back();
    CHECK_THROWS_AS(make_dataset(trs), ShapeError);
  }

  TEST_CASE("history view masks the future") {
    Trajectory tr = make_traj(5, 3, 0.0);
    HistoryView h(tr, 2);
    CHECK_NOTHROW(h.covariate(1));
    CHECK_NOTHROW(h.covariate(2));
    CHECK_NOTHROW(h.action(1));
    CHECK_THROWS_AS(h.covariate(3), MaskedAccessError);
    CHECK_THROWS_AS(h.action(2), MaskedAccessError);
    CHECK_THROWS_AS(h.covariate(0), MaskedAccessError);
    CHECK_THROWS_AS(h.action(0), MaskedAccessError);
  }

  TEST_CASE("flattened view ignores mutations beyond its window") {
    Trajectory tr = make_traj(5, 3, 0.0);
    const Eigen::VectorXd before = HistoryView(tr, 2).flattened();
    tr.covariates.row(3).setConstant(99.0);
    tr.actions[3] = 1 - tr.actions[3];
    const Eigen::VectorXd after = HistoryView(tr, 2).flattened();
    CHECK((before - after).norm() == 0.0);
    CHECK(before.size() == 2 * 3 + 1);
  }

  TEST_CASE("flattened layout is covariates then actions") {
    Trajectory tr = make_traj(4, 2, 0.0);
    const Eigen::VectorXd f = HistoryView(tr, 3).flattened();
    REQUIRE(f.size() == 3 * 2 + 2);
    for (int s = 1; s <= 3; ++s)
      for (int j = 0; j < 2; ++j) CHECK(f(2 * (s - 1) + j) == tr.covariates(s - 1, j));
    CHECK(f(6) == tr.actions[0]);
    CHECK(f(7) == tr.actions[1]);
  }

  TEST_CASE("fixed all-ones policy treats everywhere") {
    std::vector<Trajectory> trs{make_traj(3, 2, 0.0), make_traj(3, 2, 1.0)};
    Dataset ds = make_dataset(trs);
    Policy p = Policy::fixed("always", {1, 1, 1});
    Eigen::MatrixXi a = apply_policy(p, ds);
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a.minCoeff() == 1);
  }

  TEST_CASE("threshold extremes saturate to constant actions") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 4;
    spec.seed = 3;
    Dataset ds = dgp::simulate(spec, 20);
    Eigen::MatrixXi lo = apply_policy(Policy::constant_threshold("all", 0.0, 4), ds, &spec);
    Eigen::MatrixXi hi = apply_policy(Policy::constant_threshold("none", 1.0, 4), ds, &spec);
    CHECK(lo.minCoeff() == 1);
    CHECK(hi.maxCoeff() == 0);
  }

  TEST_CASE("apply_policy is deterministic") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 4;
    spec.seed = 4;
    Dataset ds = dgp::simulate(spec, 15);
    Policy p = Policy::constant_threshold("half", 0.5, 4);
    Eigen::MatrixXi a = apply_policy(p, ds, &spec);
    Eigen::MatrixXi b = apply_policy(p, ds, &spec);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0);
  }

  TEST_CASE("threshold policies sharing a schedule suffix agree on it") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 5;
    spec.seed = 5;
    Dataset ds = dgp::simulate(spec, 30);
    Policy a = Policy::threshold("a", {0.3, 0.7, 0.5, 0.5, 0.5});
    Policy b = Policy::threshold("b", {0.6, 0.4, 0.5, 0.5, 0.5});
    ActionMatrix m = apply_policies({a, b}, ds, &spec);
    const Eigen::MatrixXi diff =
        (m.policy_actions[0] - m.policy_actions[1]).cwiseAbs();
    CHECK(diff.rightCols(3).maxCoeff() == 0);
  }

  TEST_CASE("threshold policy needs the generator spec") {
    std::vector<Trajectory> trs{make_traj(3, 2, 0.0)};
    Dataset ds = make_dataset(trs);
    Policy p = Policy::constant_threshold("half", 0.5, 3);
    CHECK_THROWS_AS(apply_policy(p, ds, nullptr), ConfigError);
  }

  TEST_CASE("save and load round-trip a simulated cohort") {
    dgp::DgpSpec spec;
    spec.variant = dgp::Variant::limited;
    spec.tau = 6;
    spec.seed = 11;
    Dataset ds = dgp::simulate(spec, 100);
    TempPath tmp("roundtrip.jsonl");
    save_dataset(ds, tmp.path);
    Dataset back = load_dataset(tmp.path);
    REQUIRE(back.n() == ds.n());
    CHECK(back.tau == ds.tau);
    CHECK(back.d_l == ds.d_l);
    for (int i = 0; i < ds.n(); ++i) {
      const Trajectory& x = ds.trajectories[static_cast<std::size_t>(i)];
      const Trajectory& y = back.trajectories[static_cast<std::size_t>(i)];
      CHECK(x.id == y.id);
      CHECK(x.actions == y.actions);
      CHECK(x.outcome == y.outcome);
      CHECK((x.covariates - y.covariates).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("empty dataset writes an empty file") {
    Dataset ds = make_dataset({}, 15, 11);
    TempPath tmp("empty.jsonl");
    save_dataset(ds, tmp.path);
    std::ifstream in(tmp.path);
    REQUIRE(in.good());
    std::string line;
    CHECK_FALSE(static_cast<bool>(std::getline(in, line)));
  }

  TEST_CASE("single trajectory serializes with exactly the schema keys") {
    std::vector<Trajectory> trs{make_traj(2, 2, 0.5)};
    Dataset ds = make_dataset(trs);
    TempPath tmp("one.jsonl");
    save_dataset(ds, tmp.path);
    std::ifstream in(tmp.path);
    std::string line;
    REQUIRE(static_cast<bool>(std::getline(in, line)));
    nlohmann::json j = nlohmann::json::parse(line);
    std::set<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
    CHECK(keys == std::set<std::string>{"A", "L", "Y", "id"});
    std::string extra;
    CHECK_FALSE(static_cast<bool>(std::getline(in, extra)));
  }

  TEST_CASE("loader rejects a trajectory with a short action row") {
    TempPath tmp("bad.jsonl");
    {
      std::ofstream out(tmp.path);
      out << R"({"id":"0","L":[[0.0],[0.0]],"A":[1,0],"Y":0.5})" << "\n";
      out << R"({"id":"1","L":[[0.0],[0.0]],"A":[1],"Y":0.5})" << "\n";
    }
    CHECK_THROWS_AS(load_dataset(tmp.path), ShapeError);
  }

  TEST_CASE("missing dataset file raises an io error") {
    CHECK_THROWS_AS(load_dataset("/tmp/peq_core_definitely_absent.jsonl"), IoError);
  }
}
