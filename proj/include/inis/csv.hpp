#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "inis/common.hpp"
#include "inis/dataset.hpp"
#include "inis/model_io.hpp"

namespace inis {

// Header row plus a dense numeric body, as read from a comma-separated file.
struct NumericTable {
  std::vector<std::string> names;
  Matrix values;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// Rows are numbered from 1 after the header; errors name the row and column.
inline NumericTable read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::InvalidData, "cannot open \"" + path + "\"");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidData, "\"" + path + "\" is empty");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  NumericTable t;
  for (auto name : detail::split_commas(line)) {
    require(!name.empty(), ErrorCode::InvalidData, "empty column name in header");
    t.names.emplace_back(name);
  }
  const std::size_t cols = t.names.size();
  std::vector<double> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++rows;
    const auto fields = detail::split_commas(line);
    require(fields.size() == cols, ErrorCode::InvalidData,
            "row " + std::to_string(rows) + " has " + std::to_string(fields.size()) +
                " cells, expected " + std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j], v) || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidData, "row " + std::to_string(rows) + ", column \"" +
                                                t.names[j] + "\": cannot parse '" +
                                                std::string(fields[j]) + "' as a finite number");
      }
      cells.push_back(v);
    }
  }
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * cols + j];
    }
  }
  return t;
}

// All columns except `response_column` become covariates, in file order.
inline Dataset read_csv(const std::string& path, const std::string& response_column = "Y") {
  NumericTable t = read_table(path);
  std::size_t response = t.names.size();
  for (std::size_t j = 0; j < t.names.size(); ++j) {
    if (t.names[j] == response_column) response = j;
  }
  require(response < t.names.size(), ErrorCode::InvalidData,
          "response column \"" + response_column + "\" not found in \"" + path + "\"");
  Dataset d;
  d.response_name = response_column;
  d.response = t.values.col(static_cast<Eigen::Index>(response));
  d.covariates.resize(t.values.rows(), t.values.cols() - 1);
  Eigen::Index out = 0;
  for (std::size_t j = 0; j < t.names.size(); ++j) {
    if (j == response) continue;
    d.covariates.col(out++) = t.values.col(static_cast<Eigen::Index>(j));
    d.names.push_back(t.names[j]);
  }
  return d;
}

// Covariates in order, response last; values in shortest round-trip form.
inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InvalidData, "cannot write \"" + path + "\"");
  for (const auto& name : data.names) out << name << ',';
  out << data.response_name << '\n';
  std::string row;
  for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
      row += format_double(data.covariates(i, j));
      row += ',';
    }
    row += format_double(data.response[i]);
    row += '\n';
    out << row;
  }
  require(static_cast<bool>(out), ErrorCode::InvalidData, "write to \"" + path + "\" failed");
}

}  // namespace inis
