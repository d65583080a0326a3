#include "peq/dataset_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

namespace peq {

using nlohmann::json;

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& tr : ds.trajectories) {
    json j;
    j["id"] = tr.id;
    json rows = json::array();
    for (int r = 0; r < tr.covariates.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < tr.covariates.cols(); ++c) row.push_back(tr.covariates(r, c));
      rows.push_back(std::move(row));
    }
    j["L"] = std::move(rows);
    j["A"] = tr.actions;
    j["Y"] = tr.outcome;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<Trajectory> trajs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (!j.is_object() || !j.contains("id") || !j.contains("L") || !j.contains("A") ||
        !j.contains("Y"))
      throw IoError(where + ": trajectory object needs keys id, L, A, Y");
    Trajectory tr;
    if (!j["id"].is_string()) throw IoError(where + ": id must be a string");
    tr.id = j["id"].get<std::string>();
    if (!j["L"].is_array() || j["L"].empty())
      throw IoError(where + ": L must be a nonempty array of rows");
    const auto& L = j["L"];
    const std::size_t cols = L[0].is_array() ? L[0].size() : 0;
    if (cols == 0) throw IoError(where + ": L rows must be nonempty arrays");
    tr.covariates.resize(static_cast<Eigen::Index>(L.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < L.size(); ++r) {
      if (!L[r].is_array() || L[r].size() != cols)
        throw ShapeError(where + ": trajectory '" + tr.id + "' has a ragged L row " +
                         std::to_string(r));
      for (std::size_t c = 0; c < cols; ++c) {
        if (!L[r][c].is_number())
          throw IoError(where + ": non-numeric covariate entry");
        tr.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            L[r][c].get<double>();
      }
    }
    if (!j["A"].is_array())
      throw IoError(where + ": A must be an array");
    for (const auto& a : j["A"]) {
      if (!a.is_number_integer())
        throw IoError(where + ": non-integer action entry");
      tr.actions.push_back(a.get<int>());
    }
    if (!j["Y"].is_number()) throw IoError(where + ": Y must be a number");
    tr.outcome = j["Y"].get<double>();
    trajs.push_back(std::move(tr));
  }
  return make_dataset(std::move(trajs));
}

}  // namespace peq
