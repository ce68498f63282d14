#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace inis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Sorted, duplicate-free covariate indices (0-based).
using IndexSet = std::vector<std::size_t>;

enum class ErrorCode {
  TooFewDistinctValues,
  InvalidDimension,
  SingularGram,
  NoConvergence,
  InvalidSpec,
  InvalidData,
  InvalidArgument,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooFewDistinctValues: return "TooFewDistinctValues";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

// Union of two sorted index sets.
inline IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j] < a[i]) {
      out.push_back(b[j++]);
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

inline IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

inline bool contains(const IndexSet& set, std::size_t index) {
  auto lo = set.begin(), hi = set.end();
  while (lo < hi) {
    auto mid = lo + (hi - lo) / 2;
    if (*mid < index) lo = mid + 1; else hi = mid;
  }
  return lo != set.end() && *lo == index;
}

}  // namespace inis
