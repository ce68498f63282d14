#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "inis/common.hpp"

namespace inis {

// n x p covariates, length-n response, one name per covariate column.
struct Dataset {
  Matrix covariates;
  Vector response;
  std::vector<std::string> names;
  std::string response_name = "Y";

  std::size_t n() const noexcept { return static_cast<std::size_t>(covariates.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(covariates.cols()); }

  std::span<const double> column(std::size_t j) const {
    return {covariates.col(static_cast<Eigen::Index>(j)).data(), n()};
  }

  void validate() const {
    require(response.size() == covariates.rows(), ErrorCode::InvalidData,
            "response length " + std::to_string(response.size()) + " != " +
                std::to_string(covariates.rows()) + " rows");
    require(names.size() == p(), ErrorCode::InvalidData, "one name per covariate required");
    require(n() >= 2, ErrorCode::InvalidData, "need at least 2 observations");
    for (Eigen::Index i = 0; i < response.size(); ++i) {
      require(std::isfinite(response[i]), ErrorCode::InvalidData,
              "non-finite response in row " + std::to_string(i + 1));
    }
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
      for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
        require(std::isfinite(covariates(i, j)), ErrorCode::InvalidData,
                "non-finite value in row " + std::to_string(i + 1) + ", column \"" +
                    names[static_cast<std::size_t>(j)] + "\"");
      }
    }
  }
};

inline std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("X" + std::to_string(j + 1));
  return names;
}

inline Dataset make_dataset(Matrix covariates, Vector response) {
  Dataset d;
  d.names = default_names(static_cast<std::size_t>(covariates.cols()));
  d.covariates = std::move(covariates);
  d.response = std::move(response);
  return d;
}

// Rows `rows` of `data`, in the given order.
inline Dataset subset_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.names = data.names;
  out.response_name = data.response_name;
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), data.covariates.cols());
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(rows[r]);
    out.covariates.row(static_cast<Eigen::Index>(r)) = data.covariates.row(src);
    out.response[static_cast<Eigen::Index>(r)] = data.response[src];
  }
  return out;
}

}  // namespace inis
