#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "inis/common.hpp"

namespace inis {

// Degree used when the caller does not choose one: cubic when there is room,
// otherwise the highest degree that still leaves `dim` basis functions.
inline int default_degree(int dim) { return std::max(1, std::min(3, dim - 1)); }

// Type-7 empirical quantile (linear interpolation between order statistics)
// of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Normalized B-spline basis (partition of unity) on a clamped knot vector.
class SplineBasis {
 public:
  SplineBasis() = default;

  // Validates and adopts a full knot vector with boundary knots repeated
  // degree+1 times.
  static SplineBasis from_knots(int degree, std::vector<double> knots) {
    require(degree >= 1, ErrorCode::InvalidDimension, "spline degree must be >= 1");
    const auto order = static_cast<std::size_t>(degree) + 1;
    require(knots.size() >= 2 * order, ErrorCode::InvalidDimension,
            "knot vector too short for degree " + std::to_string(degree));
    require(std::is_sorted(knots.begin(), knots.end()), ErrorCode::InvalidArgument,
            "knot vector must be non-decreasing");
    for (std::size_t k = 1; k < order; ++k) {
      require(knots[k] == knots[0] && knots[knots.size() - 1 - k] == knots.back(),
              ErrorCode::InvalidArgument, "boundary knots must be repeated degree+1 times");
    }
    require(knots.front() < knots.back(), ErrorCode::InvalidArgument, "degenerate support");
    SplineBasis b;
    b.degree_ = degree;
    b.knots_ = std::move(knots);
    b.dim_ = static_cast<int>(b.knots_.size() - order);
    return b;
  }

  int degree() const noexcept { return degree_; }
  int dim() const noexcept { return dim_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  double lower() const noexcept { return knots_.front(); }
  double upper() const noexcept { return knots_.back(); }
  std::size_t interior_knot_count() const noexcept {
    return knots_.size() - 2 * (static_cast<std::size_t>(degree_) + 1);
  }

  // Writes the degree+1 possibly nonzero basis values at x into `values` and
  // returns the index of the first of them. x is clamped to the support.
  std::size_t evaluate_local(double x, std::span<double> values) const {
    const auto p = static_cast<std::size_t>(degree_);
    x = std::clamp(x, lower(), upper());
    const std::size_t span = find_span(x);
    double left[kMaxOrder];
    double right[kMaxOrder];
    values[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
      left[j] = x - knots_[span + 1 - j];
      right[j] = knots_[span + j] - x;
      double saved = 0.0;
      for (std::size_t r = 0; r < j; ++r) {
        const double denom = right[r + 1] + left[j - r];
        const double temp = denom > 0.0 ? values[r] / denom : 0.0;
        values[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      values[j] = saved;
    }
    return span - p;
  }

  // Row i holds all dim basis values at x[i].
  Matrix evaluate(std::span<const double> x) const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(x.size()), dim_);
    double local[kMaxOrder];
    const auto order = static_cast<std::size_t>(degree_) + 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t first = evaluate_local(x[i], std::span<double>(local, order));
      for (std::size_t k = 0; k < order; ++k) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(first + k)) = local[k];
      }
    }
    return out;
  }

  Matrix evaluate(const Vector& x) const {
    return evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  friend bool operator==(const SplineBasis&, const SplineBasis&) = default;

  static constexpr int kMaxDegree = 15;

 private:
  static constexpr std::size_t kMaxOrder = kMaxDegree + 2;

  // Largest i with knots[i] <= x < knots[i+1], restricted to nonempty spans;
  // x == upper() maps to the last nonempty span.
  std::size_t find_span(double x) const {
    const auto p = static_cast<std::size_t>(degree_);
    const std::size_t last = knots_.size() - p - 2;
    if (x >= knots_[last + 1]) {
      std::size_t s = last;
      while (s > p && knots_[s] == knots_[s + 1]) --s;
      return s;
    }
    const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                     knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  int degree_ = 0;
  int dim_ = 0;
  std::vector<double> knots_;
};

// Basis of `dim` functions of the given degree with interior knots at the
// empirical quantiles k/(m+1), k = 1..m, of x and support [min x, max x].
inline SplineBasis build_basis(std::span<const double> x, int dim, int degree) {
  require(degree >= 1 && degree <= SplineBasis::kMaxDegree, ErrorCode::InvalidDimension,
          "degree must be in [1, " + std::to_string(SplineBasis::kMaxDegree) + "]");
  require(dim >= degree + 1, ErrorCode::InvalidDimension,
          "dim " + std::to_string(dim) + " < degree + 1 = " + std::to_string(degree + 1));
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct_count = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] != sorted[i - 1]) ++distinct_count;
  }
  require(distinct_count >= static_cast<std::size_t>(dim), ErrorCode::TooFewDistinctValues,
          std::to_string(distinct_count) + " distinct values, need " + std::to_string(dim));

  const auto order = static_cast<std::size_t>(degree) + 1;
  const std::size_t interior = static_cast<std::size_t>(dim) - order;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(dim) + order);
  knots.insert(knots.end(), order, sorted.front());
  for (std::size_t k = 1; k <= interior; ++k) {
    const double q = static_cast<double>(k) / static_cast<double>(interior + 1);
    knots.push_back(sorted_quantile(sorted, q));
  }
  knots.insert(knots.end(), order, sorted.back());
  return SplineBasis::from_knots(degree, std::move(knots));
}

inline SplineBasis build_basis(const Vector& x, int dim, int degree) {
  return build_basis(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), dim,
                     degree);
}

// Column-centered design block. `values + column_means` reproduces the raw
// evaluations column by column.
struct BasisBlock {
  Matrix values;
  Vector column_means;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index width() const noexcept { return values.cols(); }
};

inline BasisBlock center_block(const Matrix& raw) {
  require(raw.rows() >= 2, ErrorCode::InvalidArgument, "centering needs at least 2 rows");
  BasisBlock block;
  block.column_means = raw.colwise().mean().transpose();
  block.values = raw.rowwise() - block.column_means.transpose();
  return block;
}

// Centered block used for fitting: the first dim-1 basis columns. Centering all
// dim columns would leave them linearly dependent (they sum to one before
// centering), so the last column is implied.
inline BasisBlock fitting_block(const SplineBasis& basis, std::span<const double> x) {
  const Matrix raw = basis.evaluate(x);
  return center_block(raw.leftCols(basis.dim() - 1));
}

inline BasisBlock fitting_block(const SplineBasis& basis, const Vector& x) {
  return fitting_block(basis,
                       std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

}  // namespace inis
