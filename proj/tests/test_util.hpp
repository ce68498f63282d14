#pragma once

#include <random>
#include <vector>

#include "inis/inis.hpp"
#include "oracles.hpp"

namespace testing_util {

inline oracle::Mat to_rows(const inis::Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[std::size_t(i)][std::size_t(j)] = m(i, j);
  }
  return out;
}

inline oracle::Vec to_vec(const inis::Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

inline inis::Vector from_vec(const oracle::Vec& v) {
  return Eigen::Map<const inis::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline inis::Vector uniform_vector(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  inis::Vector v(static_cast<Eigen::Index>(n));
  for (auto& e : v) e = u(rng);
  return v;
}

inline inis::Vector normal_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  inis::Vector v(static_cast<Eigen::Index>(n));
  for (auto& e : v) e = z(rng);
  return v;
}

inline inis::Matrix uniform_matrix(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  inis::Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
  return m;
}

// Horizontally stacked blocks as oracle rows.
inline oracle::Mat stack_rows(const std::vector<inis::BasisBlock>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.width();
  inis::Matrix m(blocks.front().rows(), total);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    m.middleCols(off, b.width()) = b.values;
    off += b.width();
  }
  return to_rows(m);
}

}  // namespace testing_util
