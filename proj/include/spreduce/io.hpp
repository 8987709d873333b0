// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spreduce/model.hpp"

namespace spreduce {

enum class ModelFormat { kJson, kMatrixMarket };

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols,
                               const std::string& key) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ParseError("model file: field '" + key + "' must be an array of " +
                     std::to_string(rows) + " rows");
  }
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError("model file: row " + std::to_string(i) + " of '" + key +
                       "' must hold " + std::to_string(cols) + " numbers");
    }
    for (Index k = 0; k < cols; ++k) {
      if (!row[k].is_number()) {
        throw ParseError("model file: non-numeric entry in '" + key + "'");
      }
      M(i, k) = row[k].get<double>();
    }
  }
  return M;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  out << text;
  if (!out) throw ParseError("write failed: " + path.string());
}

inline Index get_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    throw ParseError(std::string("model file: missing integer field '") + key + "'");
  }
  const long long v = j[key].get<long long>();
  if (v < 0) {
    throw ParseError(std::string("model file: field '") + key + "' must be nonnegative");
  }
  return static_cast<Index>(v);
}

/// Writes one matrix in Matrix Market coordinate (triplet) format with
/// 17-significant-digit entries, which round-trip 64-bit floats exactly.
inline void write_matrix_market(const std::filesystem::path& path, const Matrix& M) {
  std::ostringstream out;
  out << "%%MatrixMarket matrix coordinate real general\n";
  Index nnz = 0;
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (M(i, j) != 0.0) ++nnz;
    }
  }
  out << M.rows() << " " << M.cols() << " " << nnz << "\n";
  char buf[64];
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (M(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
      out << (i + 1) << " " << (j + 1) << " " << buf << "\n";
    }
  }
  write_text_file(path, out.str());
}

inline Matrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market file: " + path.string());
  {
    std::istringstream head(line);
    std::string banner, object, format, field, symmetry;
    head >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate" ||
        field != "real" || symmetry != "general") {
      throw ParseError("unsupported Matrix Market header in " + path.string() +
                       " (need: matrix coordinate real general)");
    }
  }
  do {
    if (!std::getline(in, line)) {
      throw ParseError("missing size line in " + path.string());
    }
  } while (!line.empty() && line[0] == '%');
  Index rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream sizes(line);
    if (!(sizes >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
      throw ParseError("malformed size line in " + path.string());
    }
  }
  Matrix M = Matrix::Zero(rows, cols);
  std::vector<bool> seen(static_cast<std::size_t>(rows * cols), false);
  for (Index k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) {
      throw ParseError("truncated entry list in " + path.string());
    }
    if (i < 1 || i > rows || j < 1 || j > cols) {
      throw ParseError("entry index out of range in " + path.string());
    }
    const std::size_t flat = static_cast<std::size_t>((i - 1) * cols + (j - 1));
    if (seen[flat]) {
      throw ParseError("duplicate entry in " + path.string());
    }
    seen[flat] = true;
    M(i - 1, j - 1) = v;
  }
  return M;
}

}  // namespace detail

/// Saves a model. For kJson, `path` names one file holding
/// {"n","m","p","A","B","C","labels"?}. For kMatrixMarket, `path` names a
/// directory receiving A.mtx, B.mtx, C.mtx and a dims.txt with "n m p"
/// (labels are not representable in this format and are dropped).
inline void save_model(const StateSpaceModel& model, const std::filesystem::path& path,
                       ModelFormat format = ModelFormat::kJson) {
  if (format == ModelFormat::kJson) {
    nlohmann::json j;
    j["n"] = model.n();
    j["m"] = model.m();
    j["p"] = model.p();
    j["A"] = detail::matrix_to_json(model.A);
    j["B"] = detail::matrix_to_json(model.B);
    j["C"] = detail::matrix_to_json(model.C);
    if (!model.labels.empty()) j["labels"] = model.labels;
    detail::write_text_file(path, j.dump(2) + "\n");
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ParseError("cannot create directory: " + path.string());
  detail::write_matrix_market(path / "A.mtx", model.A);
  detail::write_matrix_market(path / "B.mtx", model.B);
  detail::write_matrix_market(path / "C.mtx", model.C);
  std::ostringstream dims;
  dims << model.n() << " " << model.m() << " " << model.p() << "\n";
  detail::write_text_file(path / "dims.txt", dims.str());
}

/// Loads and validates a model; stability is checked on construction and a
/// violation reports the offending maximum eigenvalue real part.
inline StateSpaceModel load_model(const std::filesystem::path& path,
                                  ModelFormat format = ModelFormat::kJson) {
  if (format == ModelFormat::kJson) {
    const nlohmann::json j = detail::read_json_file(path);
    const Index n = detail::get_count(j, "n");
    const Index m = detail::get_count(j, "m");
    const Index p = detail::get_count(j, "p");
    if (!j.contains("A") || !j.contains("B") || !j.contains("C")) {
      throw ParseError("model file: missing A/B/C field in " + path.string());
    }
    Matrix A = detail::matrix_from_json(j["A"], n, n, "A");
    Matrix B = detail::matrix_from_json(j["B"], n, m, "B");
    Matrix C = detail::matrix_from_json(j["C"], p, n, "C");
    std::vector<std::string> labels;
    if (j.contains("labels")) {
      if (!j["labels"].is_array()) {
        throw ParseError("model file: 'labels' must be an array of strings");
      }
      for (const auto& item : j["labels"]) {
        if (!item.is_string()) {
          throw ParseError("model file: 'labels' must be an array of strings");
        }
        labels.push_back(item.get<std::string>());
      }
    }
    return StateSpaceModel(std::move(A), std::move(B), std::move(C), std::move(labels));
  }

  const Matrix A = detail::read_matrix_market(path / "A.mtx");
  const Matrix B = detail::read_matrix_market(path / "B.mtx");
  const Matrix C = detail::read_matrix_market(path / "C.mtx");
  std::ifstream dims(path / "dims.txt");
  if (!dims) throw ParseError("cannot open file: " + (path / "dims.txt").string());
  Index n = 0, m = 0, p = 0;
  if (!(dims >> n >> m >> p)) {
    throw ParseError("malformed dims.txt in " + path.string());
  }
  if (A.rows() != n || A.cols() != n || B.rows() != n || B.cols() != m ||
      C.rows() != p || C.cols() != n) {
    throw DimensionMismatch("model directory " + path.string() +
                            ": matrix shapes disagree with dims.txt");
  }
  return StateSpaceModel(A, B, C);
}

/// Saves a reduced model with its projection:
/// {"r","m","p","Ahat","Bhat","Chat","Dhat","P","Q"}.
inline void save_reduced(const ReducedModel& reduced, const std::filesystem::path& path) {
  nlohmann::json j;
  j["r"] = reduced.order();
  j["m"] = reduced.m();
  j["p"] = reduced.p();
  j["Ahat"] = detail::matrix_to_json(reduced.Ahat);
  j["Bhat"] = detail::matrix_to_json(reduced.Bhat);
  j["Chat"] = detail::matrix_to_json(reduced.Chat);
  j["Dhat"] = detail::matrix_to_json(reduced.Dhat);
  j["P"] = detail::matrix_to_json(reduced.projection.P);
  j["Q"] = detail::matrix_to_json(reduced.projection.Q);
  detail::write_text_file(path, j.dump(2) + "\n");
}

inline ReducedModel load_reduced(const std::filesystem::path& path) {
  const nlohmann::json j = detail::read_json_file(path);
  const Index r = detail::get_count(j, "r");
  const Index m = detail::get_count(j, "m");
  const Index p = detail::get_count(j, "p");
  for (const char* key : {"Ahat", "Bhat", "Chat", "Dhat", "P", "Q"}) {
    if (!j.contains(key)) {
      throw ParseError(std::string("reduced-model file: missing field '") + key + "'");
    }
  }
  if (!j["P"].is_array() || j["P"].empty() || !j["P"][0].is_array()) {
    throw ParseError("reduced-model file: field 'P' must be a nonempty matrix");
  }
  const Index n = static_cast<Index>(j["P"][0].size());
  Matrix P = detail::matrix_from_json(j["P"], r, n, "P");
  Matrix Q = detail::matrix_from_json(j["Q"], n - r, n, "Q");
  Matrix Ahat = detail::matrix_from_json(j["Ahat"], r, r, "Ahat");
  Matrix Bhat = detail::matrix_from_json(j["Bhat"], r, m, "Bhat");
  Matrix Chat = detail::matrix_from_json(j["Chat"], p, r, "Chat");
  Matrix Dhat = detail::matrix_from_json(j["Dhat"], p, m, "Dhat");
  return ReducedModel(std::move(Ahat), std::move(Bhat), std::move(Chat),
                      std::move(Dhat), ProjectionPair(std::move(P), std::move(Q)));
}

}  // namespace spreduce
