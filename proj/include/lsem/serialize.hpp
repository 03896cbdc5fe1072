#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/matrix.hpp"
#include "lsem/recovery.hpp"
#include "lsem/scm.hpp"
#include "lsem/stability.hpp"

namespace lsem {

using Json = nlohmann::ordered_json;

// Matrices are arrays of rows.

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "matrix must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(ErrorCode::ParseError, "matrix rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw Error(ErrorCode::ParseError, "matrix entries must be numbers");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

inline Json optional_number(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline Json graph_to_json(const MixedGraph& g) {
  Json out;
  out["n"] = g.size();
  Json d = Json::array(), b = Json::array();
  for (const auto& [i, j] : g.directed()) d.push_back({i, j});
  for (const auto& [i, j] : g.bidirected()) b.push_back({i, j});
  out["directed"] = std::move(d);
  out["bidirected"] = std::move(b);
  return out;
}

inline MixedGraph graph_from_json(const Json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    auto edges = [&](const char* key) {
      std::vector<Edge> out;
      if (!j.contains(key)) return out;
      for (const auto& e : j.at(key)) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::ParseError, std::string(key) + " edges must be pairs");
        out.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
      }
      return out;
    };
    return MixedGraph(n, edges("directed"), edges("bidirected"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("graph JSON: ") + e.what());
  }
}

inline Json parameters_to_json(const Parameters& p) {
  Json out;
  out["graph"] = graph_to_json(p.graph);
  out["lambda"] = matrix_to_json(p.lambda);
  out["omega"] = matrix_to_json(p.omega);
  out["gram_vectors"] = p.gram_vectors ? matrix_to_json(*p.gram_vectors) : Json(nullptr);
  return out;
}

inline Parameters parameters_from_json(const Json& j) {
  try {
    Parameters p;
    p.graph = graph_from_json(j.at("graph"));
    p.lambda = matrix_from_json(j.at("lambda"));
    p.omega = matrix_from_json(j.at("omega"));
    if (j.contains("gram_vectors") && !j.at("gram_vectors").is_null())
      p.gram_vectors = matrix_from_json(j.at("gram_vectors"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("parameters JSON: ") + e.what());
  }
}

inline Json recovery_to_json(const RecoveryResult& r) {
  Json out;
  out["lambda"] = matrix_to_json(r.lambda_hat);
  out["omega"] = r.omega_hat ? matrix_to_json(*r.omega_hat) : Json(nullptr);
  Json piv = Json::array();
  for (const auto& v : r.min_pivots) piv.push_back(optional_number(v));
  out["min_pivots"] = std::move(piv);
  return out;
}

inline Json condition_report_to_json(const ConditionReport& r) {
  Json out;
  out["trials"] = r.trials;
  out["mean_kappa"] = optional_number(r.mean_kappa);
  out["failed"] = r.failed_trials;
  out["kappas"] = r.kappas;
  out["histogram"] = {{"edges", r.histogram.edges}, {"counts", r.histogram.counts}};
  return out;
}

inline Json heuristic_to_json(const HeuristicResult& r) {
  Json out;
  out["verdict"] = to_string(r.verdict);
  out["mean_kappa"] = optional_number(r.mean_kappa);
  out["tau"] = r.tau;
  out["eps"] = r.eps;
  out["trials"] = r.trials;
  out["failed"] = r.failed_trials;
  out["explanation"] = r.explanation;
  return out;
}

inline Json model_check_to_json(const ModelCheckReport& r) {
  auto seq = [](const std::vector<std::optional<double>>& v) {
    Json a = Json::array();
    for (const auto& x : v) a.push_back(optional_number(x));
    return a;
  };
  Json out;
  out["alpha_min"] = r.alpha_min;
  out["lambda_param"] = optional_number(r.lambda_param);
  out["satisfied"] = r.satisfied;
  out["left_ratio"] = seq(r.left_ratio);
  out["right_ratio"] = seq(r.right_ratio);
  out["across_ratio"] = seq(r.across_ratio);
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

/// Observational data: a header row of variable names, then one sample per row.
struct DataTable {
  std::vector<std::string> names;
  Matrix values;
};

inline DataTable read_data_csv(std::istream& is) {
  DataTable t;
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "data CSV: missing header row");
  for (auto cell : split_csv_line(line)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    t.names.emplace_back(cell);
  }
  const std::size_t cols = t.names.size();
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != cols)
      throw Error(ErrorCode::ParseError, "data CSV: row " + std::to_string(rows + 1) + " has " +
                                             std::to_string(cells.size()) + " cells, expected " + std::to_string(cols));
    for (auto c : cells) flat.push_back(parse_double(c));
    ++rows;
  }
  t.values = Matrix(rows, cols);
  std::copy(flat.begin(), flat.end(), t.values.values().begin());
  return t;
}

inline DataTable read_data_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open data file " + path);
  return read_data_csv(in);
}

inline void write_data_csv(std::ostream& os, const DataTable& t) {
  for (std::size_t j = 0; j < t.names.size(); ++j) os << (j ? "," : "") << t.names[j];
  os << '\n';
  for (std::size_t i = 0; i < t.values.rows(); ++i) {
    for (std::size_t j = 0; j < t.values.cols(); ++j) os << (j ? "," : "") << format_double(t.values(i, j));
    os << '\n';
  }
}

inline Matrix read_matrix_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open matrix file " + path);
  return read_matrix_csv(in);
}

}  // namespace lsem
