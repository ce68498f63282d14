#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "inis/common.hpp"
#include "inis/dataset.hpp"
#include "inis/marginal_regression.hpp"
#include "inis/rng.hpp"

namespace inis {

struct ScreenResult {
  std::vector<double> scores;
  std::vector<std::size_t> ranking;  // by descending score, ties by ascending index
  std::optional<double> threshold;
  std::vector<std::size_t> selected;  // in ranking order
};

inline ScreenResult make_screen_result(std::vector<double> scores) {
  ScreenResult r;
  r.scores = std::move(scores);
  r.ranking.resize(r.scores.size());
  std::iota(r.ranking.begin(), r.ranking.end(), std::size_t{0});
  std::stable_sort(r.ranking.begin(), r.ranking.end(), [&](std::size_t a, std::size_t b) {
    return r.scores[a] > r.scores[b];
  });
  return r;
}

// Selects {j : score_j >= threshold}, a prefix of the ranking.
inline void apply_threshold(ScreenResult& result, double threshold) {
  result.threshold = threshold;
  result.selected.clear();
  for (auto j : result.ranking) {
    if (!(result.scores[j] >= threshold)) break;
    result.selected.push_back(j);
  }
}

// Selects the first k ranked covariates with a strictly positive score.
inline void apply_top_k(ScreenResult& result, std::size_t k) {
  result.selected.clear();
  for (auto j : result.ranking) {
    if (result.selected.size() >= k || !(result.scores[j] > 0.0)) break;
    result.selected.push_back(j);
  }
  result.threshold = result.selected.empty() ? std::nullopt
                                             : std::optional(result.scores[result.selected.back()]);
}

// Type-7 empirical quantile of an unsorted sample. q = 1 is the maximum.
inline double empirical_quantile(std::vector<double> sample, double q) {
  std::sort(sample.begin(), sample.end());
  return sorted_quantile(sample, q);
}

inline double median(std::vector<double> sample) { return empirical_quantile(std::move(sample), 0.5); }

// IQR / 1.34 with quartiles taken as medians of the lower and upper halves
// (the middle observation of an odd-sized sample belongs to neither half).
inline double robust_sd(std::span<const double> samples) {
  require(samples.size() >= 2, ErrorCode::InvalidArgument, "robust_sd needs >= 2 samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const std::size_t half = s.size() / 2;
  const std::span<const double> lower(s.data(), half);
  const std::span<const double> upper(s.data() + (s.size() - half), half);
  return (sorted_quantile(upper, 0.5) - sorted_quantile(lower, 0.5)) / 1.34;
}

// Nonparametric screening scores ||f_nj||_n^2 over a prebuilt design.
inline ScreenResult nis_scores(const BasisDesign& design, const Vector& y,
                               std::size_t threads = 1) {
  return make_screen_result(ConditionalScorer(design, y, {}).scores(nullptr, threads));
}

inline ScreenResult nis_scores(const Dataset& data, int dim, int degree,
                               std::size_t threads = 1) {
  data.validate();
  const BasisDesign design = BasisDesign::build(data.covariates, dim, degree, threads);
  return nis_scores(design, data.response, threads);
}

namespace detail {

inline std::vector<double> abs_correlations(const Matrix& x, const Vector& y,
                                            const std::vector<std::size_t>* permutation) {
  const Vector yc = centered(y);
  const double ynorm = yc.norm();
  std::vector<double> out(static_cast<std::size_t>(x.cols()), 0.0);
  if (!(ynorm > 0.0)) return out;
  Vector yp = yc;
  if (permutation != nullptr) {
    // Permuting rows of X against fixed y equals permuting y the other way.
    for (std::size_t i = 0; i < permutation->size(); ++i) {
      yp[static_cast<Eigen::Index>((*permutation)[i])] = yc[static_cast<Eigen::Index>(i)];
    }
  }
  const double root_n = std::sqrt(static_cast<double>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Vector xc = (x.col(j).array() - x.col(j).mean()).matrix();
    const double xnorm = xc.norm();
    const double scale = std::max(1.0, x.col(j).cwiseAbs().maxCoeff());
    if (!(xnorm > 1e-12 * scale * root_n)) continue;
    out[static_cast<std::size_t>(j)] = std::abs(xc.dot(yp)) / (xnorm * ynorm);
  }
  return out;
}

}  // namespace detail

// Linear baseline: |Pearson correlation(X_j, Y)|; zero-variance columns score 0.
inline ScreenResult sis_scores(const Dataset& data) {
  data.validate();
  return make_screen_result(detail::abs_correlations(data.covariates, data.response, nullptr));
}

// q-th quantile of the scores of covariates outside `fixed` after their rows are
// permuted by one uniform random permutation drawn from `seed`. Covariates in
// `fixed` keep their alignment with y and are regressed out.
inline double permutation_threshold(const ConditionalScorer& scorer, double q,
                                    std::uint64_t seed, std::size_t threads = 1) {
  require(q >= 0.0 && q <= 1.0, ErrorCode::InvalidArgument, "q must be in [0,1]");
  Rng rng(seed);
  const auto perm = random_permutation(scorer.design().n(), rng);
  const std::vector<double> permuted = scorer.scores(&perm, threads);
  std::vector<double> pool;
  pool.reserve(permuted.size());
  for (std::size_t j = 0; j < permuted.size(); ++j) {
    if (!contains(scorer.active(), j)) pool.push_back(permuted[j]);
  }
  require(!pool.empty(), ErrorCode::InvalidArgument, "no covariates outside the fixed set");
  return empirical_quantile(std::move(pool), q);
}

inline double permutation_threshold(const BasisDesign& design, const Vector& y, double q,
                                    std::uint64_t seed, const IndexSet& fixed = {},
                                    std::size_t threads = 1) {
  return permutation_threshold(ConditionalScorer(design, y, fixed), q, seed, threads);
}

inline double permutation_threshold(const Dataset& data, int dim, int degree, double q,
                                    std::uint64_t seed, const IndexSet& fixed = {},
                                    std::size_t threads = 1) {
  data.validate();
  const BasisDesign design = BasisDesign::build(data.covariates, dim, degree, threads);
  return permutation_threshold(design, data.response, q, seed, fixed, threads);
}

inline double sis_permutation_threshold(const Dataset& data, double q, std::uint64_t seed) {
  require(q >= 0.0 && q <= 1.0, ErrorCode::InvalidArgument, "q must be in [0,1]");
  Rng rng(seed);
  const auto perm = random_permutation(data.n(), rng);
  return empirical_quantile(detail::abs_correlations(data.covariates, data.response, &perm), q);
}

// Smallest k such that the first k ranked covariates contain `truth`.
inline std::size_t minimum_model_size(const ScreenResult& result, const IndexSet& truth) {
  require(!truth.empty(), ErrorCode::InvalidArgument, "truth set must be nonempty");
  std::vector<std::size_t> position(result.scores.size(), result.scores.size());
  for (std::size_t k = 0; k < result.ranking.size(); ++k) position[result.ranking[k]] = k + 1;
  std::size_t mms = 0;
  for (auto j : truth) {
    require(j < result.scores.size(), ErrorCode::InvalidArgument, "truth index out of range");
    mms = std::max(mms, position[j]);
  }
  return mms;
}

}  // namespace inis
