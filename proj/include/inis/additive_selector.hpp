#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "inis/common.hpp"
#include "inis/parallel.hpp"
#include "inis/rng.hpp"
#include "inis/spline_basis.hpp"

namespace inis {

// A candidate component: its basis and the centered fitting block on the
// training rows.
struct Candidate {
  SplineBasis basis;
  BasisBlock block;
  std::string name;
};

using CandidateMap = std::map<std::size_t, Candidate>;

struct AdditiveComponent {
  std::size_t index = 0;
  std::string name;
  SplineBasis basis;
  Vector column_means;
  Vector coefficients;

  // Component value at x (clamped to the basis support).
  double evaluate(double x) const {
    double local[SplineBasis::kMaxDegree + 2];
    const auto order = static_cast<std::size_t>(basis.degree()) + 1;
    const std::size_t first = basis.evaluate_local(x, std::span<double>(local, order));
    double value = -column_means.dot(coefficients);
    const auto width = static_cast<std::size_t>(coefficients.size());
    for (std::size_t k = 0; k < order; ++k) {
      const std::size_t col = first + k;
      if (col < width) value += local[k] * coefficients[static_cast<Eigen::Index>(col)];
    }
    return value;
  }
};

// Intercept plus one spline component per selected covariate; components are
// sorted by covariate index and never carry an all-zero coefficient vector.
struct AdditiveModel {
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<AdditiveComponent> components;

  IndexSet indices() const {
    IndexSet out;
    for (const auto& c : components) out.push_back(c.index);
    return out;
  }

  bool empty() const noexcept { return components.empty(); }
};

inline Vector predict(const AdditiveModel& model, const Matrix& covariates) {
  Vector out = Vector::Constant(covariates.rows(), model.intercept);
  for (const auto& c : model.components) {
    require(c.index < static_cast<std::size_t>(covariates.cols()), ErrorCode::InvalidArgument,
            "model uses covariate " + std::to_string(c.index + 1) + " but data has " +
                std::to_string(covariates.cols()) + " columns");
    const auto col = covariates.col(static_cast<Eigen::Index>(c.index));
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) out[i] += c.evaluate(col[i]);
  }
  return out;
}

struct GroupLassoOptions {
  double tolerance = 1e-6;      // max absolute coefficient change per sweep
  double kkt_tolerance = 1e-6;  // relative to lambda * weight
  int max_sweeps = 10000;
  bool record_objective = false;
};

namespace detail {

// Group lasso on a centered design:
//   (1/2n)||y - X beta||^2 + lambda * sum_j sqrt(width_j) ||beta_j||,
// minimized by cyclic exact block coordinate descent.
class GroupLassoSolver {
 public:
  GroupLassoSolver(Matrix x, Vector y, std::vector<Eigen::Index> widths)
      : x_(std::move(x)), y_(std::move(y)), widths_(std::move(widths)) {
    const double n = static_cast<double>(x_.rows());
    offsets_.resize(widths_.size());
    Eigen::Index off = 0;
    for (std::size_t g = 0; g < widths_.size(); ++g) {
      offsets_[g] = off;
      off += widths_[g];
    }
    require(off == x_.cols(), ErrorCode::InvalidArgument, "group widths do not cover design");
    eigvecs_.resize(widths_.size());
    eigvals_.resize(widths_.size());
    weights_.resize(widths_.size());
    for (std::size_t g = 0; g < widths_.size(); ++g) {
      const auto xg = x_.middleCols(offsets_[g], widths_[g]);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(xg.transpose() * xg / n));
      eigvecs_[g] = eig.eigenvectors();
      eigvals_[g] = eig.eigenvalues().cwiseMax(0.0);
      weights_[g] = std::sqrt(static_cast<double>(widths_[g]));
    }
    beta_ = Vector::Zero(x_.cols());
    residual_ = y_;
  }

  std::size_t groups() const noexcept { return widths_.size(); }
  Eigen::Index offset(std::size_t g) const { return offsets_[g]; }
  Eigen::Index width(std::size_t g) const { return widths_[g]; }
  double weight(std::size_t g) const { return weights_[g]; }
  const Vector& beta() const noexcept { return beta_; }
  const Vector& residual() const noexcept { return residual_; }

  // Smallest lambda at which every group is zero.
  double lambda_max() const {
    const double n = static_cast<double>(x_.rows());
    double out = 0.0;
    for (std::size_t g = 0; g < groups(); ++g) {
      const Vector grad = x_.middleCols(offsets_[g], widths_[g]).transpose() * y_ / n;
      out = std::max(out, grad.norm() / weights_[g]);
    }
    return out;
  }

  double objective(double lambda) const {
    double pen = 0.0;
    for (std::size_t g = 0; g < groups(); ++g) {
      pen += weights_[g] * beta_.segment(offsets_[g], widths_[g]).norm();
    }
    return residual_.squaredNorm() / (2.0 * static_cast<double>(x_.rows())) + lambda * pen;
  }

  // Largest KKT violation, relative to max(lambda * weight, floor).
  double kkt_violation(double lambda, double floor) const {
    const double n = static_cast<double>(x_.rows());
    double worst = 0.0;
    for (std::size_t g = 0; g < groups(); ++g) {
      const Vector grad = x_.middleCols(offsets_[g], widths_[g]).transpose() * residual_ / n;
      const auto b = beta_.segment(offsets_[g], widths_[g]);
      const double lw = lambda * weights_[g];
      const double scale = std::max(lw, floor);
      const double bn = b.norm();
      double v;
      if (bn > 0.0) {
        v = (grad - lw * b / bn).norm();
      } else {
        v = std::max(0.0, grad.norm() - lw);
      }
      worst = std::max(worst, v / scale);
    }
    return worst;
  }

  struct Outcome {
    bool converged = false;
    int sweeps = 0;
    std::vector<double> objective_trace;
  };

  // Solves at `lambda` starting from the current coefficients.
  Outcome solve(double lambda, const GroupLassoOptions& opt) {
    Outcome out;
    const double floor = std::max(lambda_max_cached(), 1e-300) * 1e-3;
    std::vector<std::size_t> all(groups());
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto step = [&](const std::vector<std::size_t>& order) {
      const double change = sweep(order, lambda);
      ++out.sweeps;
      if (opt.record_objective) out.objective_trace.push_back(objective(lambda));
      return change;
    };
    if (lambda >= lambda_max_cached()) {
      // Zero is optimal; set it directly so rounding in the block test cannot
      // admit a group at exactly lambda_max.
      set_beta(Vector::Zero(x_.cols()));
      if (opt.record_objective) out.objective_trace.push_back(objective(lambda));
      out.converged = true;
      return out;
    }
    if (opt.record_objective) out.objective_trace.push_back(objective(lambda));
    // Full sweeps admit new groups; between them the nonzero groups are cycled
    // until they settle. A quiet full sweep that still fails the KKT check
    // tightens how far the nonzero groups are settled.
    double inner_tol = opt.tolerance;
    while (out.sweeps < opt.max_sweeps) {
      const double full = step(all);
      if (full < opt.tolerance) {
        if (kkt_violation(lambda, floor) <= opt.kkt_tolerance) {
          out.converged = true;
          break;
        }
        inner_tol = std::max(inner_tol * 0.01, 1e-13);
      }
      std::vector<std::size_t> active;
      for (auto g : all) {
        if (beta_.segment(offsets_[g], widths_[g]).squaredNorm() > 0.0) active.push_back(g);
      }
      if (active.empty()) continue;
      double change = 0.0;
      do {
        change = step(active);
      } while (change >= inner_tol && out.sweeps < opt.max_sweeps);
    }
    return out;
  }

  // Columns in the nonzero groups.
  Eigen::Index active_columns() const {
    Eigen::Index total = 0;
    for (std::size_t g = 0; g < groups(); ++g) {
      if (beta_.segment(offsets_[g], widths_[g]).squaredNorm() > 0.0) total += widths_[g];
    }
    return total;
  }

  Eigen::Index rows() const noexcept { return x_.rows(); }

  void set_beta(const Vector& beta) {
    beta_ = beta;
    residual_ = y_ - x_ * beta_;
  }

 private:
  double lambda_max_cached() {
    if (lambda_max_ < 0.0) lambda_max_ = lambda_max();
    return lambda_max_;
  }

  // One pass of exact block minimizations; returns the largest coefficient change.
  double sweep(const std::vector<std::size_t>& order, double lambda) {
    const double n = static_cast<double>(x_.rows());
    double change = 0.0;
    for (auto g : order) {
      const auto xg = x_.middleCols(offsets_[g], widths_[g]);
      auto bg = beta_.segment(offsets_[g], widths_[g]);
      const Vector old = bg;
      const Vector& h = eigvals_[g];
      const Matrix& v = eigvecs_[g];
      // Gradient of the smooth part with the group's own contribution removed.
      Vector c = xg.transpose() * residual_ / n;
      if (old.squaredNorm() > 0.0) c.noalias() += v * (h.asDiagonal() * (v.transpose() * old));
      const Vector updated = block_minimizer(c, h, v, lambda * weights_[g]);
      const Vector delta = updated - old;
      const double d = delta.cwiseAbs().maxCoeff();
      if (d > 0.0) {
        bg = updated;
        residual_.noalias() -= xg * delta;
      }
      change = std::max(change, d);
    }
    return change;
  }

  // argmin_b 1/2 b'Hb - c'b + t||b|| with H = V diag(h) V'.
  // For ||c|| > t the minimizer is b = (H + (t/s) I)^{-1} c with s = ||b||, the
  // unique root of sum_k ct_k^2 / (h_k s + t)^2 = 1, which is convex and
  // decreasing in s; Newton from s = 0 approaches it monotonically.
  static Vector block_minimizer(const Vector& c, const Vector& h, const Matrix& v, double t) {
    if (c.norm() <= t) return Vector::Zero(c.size());
    const Vector ct = v.transpose() * c;
    if (t <= 0.0) {
      Vector z = ct;
      for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = h[k] > 0.0 ? z[k] / h[k] : 0.0;
      return v * z;
    }
    double s = 0.0;
    for (int it = 0; it < 200; ++it) {
      double phi = -1.0, dphi = 0.0;
      for (Eigen::Index k = 0; k < ct.size(); ++k) {
        const double den = h[k] * s + t;
        const double c2 = ct[k] * ct[k];
        phi += c2 / (den * den);
        dphi -= 2.0 * c2 * h[k] / (den * den * den);
      }
      if (!(dphi < 0.0)) break;  // H == 0 along every direction of c
      const double next = s - phi / dphi;
      if (!(next > s) || next - s <= 1e-15 * next) {
        s = std::max(s, next);
        break;
      }
      s = next;
    }
    Vector z(ct.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = ct[k] * s / (h[k] * s + t);
    return v * z;
  }

  Matrix x_;
  Vector y_;
  std::vector<Eigen::Index> widths_;
  std::vector<Eigen::Index> offsets_;
  std::vector<Matrix> eigvecs_;
  std::vector<Vector> eigvals_;
  std::vector<double> weights_;
  Vector beta_;
  Vector residual_;
  double lambda_max_ = -1.0;
};

struct StackedCandidates {
  Matrix x;  // candidate blocks side by side
  std::vector<Eigen::Index> widths;
  std::vector<std::size_t> indices;
};

inline StackedCandidates stack(const CandidateMap& candidates, Eigen::Index rows) {
  StackedCandidates s;
  Eigen::Index total = 0;
  for (const auto& [j, c] : candidates) {
    require(c.block.rows() == rows, ErrorCode::InvalidArgument, "candidate block size mismatch");
    total += c.block.width();
    s.widths.push_back(c.block.width());
    s.indices.push_back(j);
  }
  s.x.resize(rows, total);
  Eigen::Index off = 0;
  for (const auto& [j, c] : candidates) {
    s.x.middleCols(off, c.block.width()) = c.block.values;
    off += c.block.width();
  }
  return s;
}

inline AdditiveModel assemble_model(const CandidateMap& candidates, const Vector& beta,
                                    double intercept, double lambda) {
  AdditiveModel m;
  m.intercept = intercept;
  m.lambda = lambda;
  Eigen::Index off = 0;
  for (const auto& [j, c] : candidates) {
    const Vector b = beta.segment(off, c.block.width());
    off += c.block.width();
    if (b.squaredNorm() == 0.0) continue;
    m.components.push_back(AdditiveComponent{j, c.name, c.basis, c.block.column_means, b});
  }
  return m;
}

}  // namespace detail

struct GroupLassoResult {
  AdditiveModel model;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> objective_trace;  // filled when options.record_objective
};

// Smallest penalty at which every candidate group is zero:
// max_j ||(1/n) B_j' y_c|| / sqrt(width_j).
inline double lambda_max(const Vector& y, const CandidateMap& candidates) {
  const Vector yc = (y.array() - y.mean()).matrix();
  auto s = detail::stack(candidates, y.size());
  return detail::GroupLassoSolver(std::move(s.x), yc, std::move(s.widths)).lambda_max();
}

// Group lasso over centered candidate blocks at a fixed penalty. On
// NoConvergence the last iterate is returned with converged = false.
inline GroupLassoResult fit_group_lasso(const Vector& y, const CandidateMap& candidates,
                                        double lambda, const GroupLassoOptions& options = {}) {
  require(lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
  const Vector yc = (y.array() - y.mean()).matrix();
  auto s = detail::stack(candidates, y.size());
  detail::GroupLassoSolver solver(std::move(s.x), yc, std::move(s.widths));
  GroupLassoResult r;
  auto outcome = solver.solve(lambda, options);
  r.converged = outcome.converged;
  r.sweeps = outcome.sweeps;
  r.objective_trace = std::move(outcome.objective_trace);
  r.model = detail::assemble_model(candidates, solver.beta(), y.mean(), lambda);
  return r;
}

struct LambdaPath {
  std::vector<double> values;     // strictly decreasing, values[0] = lambda_max
  std::vector<double> cv_errors;  // pooled held-out mean squared error
  std::vector<double> cv_se;      // standard error of the fold-wise errors
  std::size_t selected = 0;
};

struct CvOptions {
  std::size_t n_folds = 5;
  std::size_t grid_size = 50;
  double min_ratio = 1e-3;
  bool one_se_rule = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // folds solved in parallel
  bool stop_at_saturation = true;
  GroupLassoOptions solver{};
};

struct CvResult {
  AdditiveModel model;
  LambdaPath path;
  std::size_t nonconverged = 0;  // grid points (over all folds) without convergence
  bool converged = true;         // the refit at the selected lambda
  bool truncated = false;        // path stopped early at saturation
};

// Fold label per row: a seeded shuffle dealt round-robin into n_folds folds.
inline std::vector<std::size_t> assign_folds(std::size_t n, std::size_t n_folds,
                                             std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = random_permutation(n, rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[perm[k]] = k % n_folds;
  return fold;
}

// Cross-validated group lasso: geometric grid from lambda_max down to
// min_ratio * lambda_max, warm starts along the path, refit on all rows at
// the chosen lambda.
inline CvResult cv_select(const Vector& y, const CandidateMap& candidates,
                          const CvOptions& options = {}) {
  const auto n = static_cast<std::size_t>(y.size());
  require(options.n_folds >= 2, ErrorCode::InvalidArgument, "need at least 2 folds");
  require(n >= 2 * options.n_folds || options.n_folds == n, ErrorCode::InvalidArgument,
          "need n >= 2 * n_folds");
  require(options.grid_size >= 1, ErrorCode::InvalidArgument, "grid_size must be >= 1");
  CvResult result;
  const double ybar = y.mean();
  const Vector yc = (y.array() - ybar).matrix();
  auto full = detail::stack(candidates, y.size());
  const double lmax = candidates.empty()
                          ? 0.0
                          : detail::GroupLassoSolver(full.x, yc, full.widths).lambda_max();
  if (!(lmax > 0.0)) {
    result.model.intercept = ybar;
    result.path.values = {0.0};
    result.path.cv_errors = {yc.squaredNorm() / static_cast<double>(n)};
    result.path.cv_se = {0.0};
    return result;
  }

  LambdaPath& path = result.path;
  const std::size_t grid = options.grid_size;
  path.values.resize(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    const double frac = grid == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(grid - 1);
    path.values[k] = lmax * std::pow(options.min_ratio, frac);
  }

  const auto fold = assign_folds(n, options.n_folds, options.seed);
  std::vector<std::size_t> fold_size(options.n_folds, 0);
  for (auto f : fold) ++fold_size[f];

  struct FoldFit {
    detail::GroupLassoSolver solver;
    Matrix xv;
    Vector yv;
    double ymean;
  };
  std::vector<std::optional<FoldFit>> fits(options.n_folds);
  for (std::size_t f = 0; f < options.n_folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < n; ++i) {
      (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    }
    if (test.empty()) continue;
    Matrix xt = full.x(train, Eigen::all);
    Vector yt = y(train);
    const Eigen::RowVectorXd xmean = xt.colwise().mean();
    const double ymean = yt.mean();
    xt.rowwise() -= xmean;
    yt.array() -= ymean;
    Matrix xv = full.x(test, Eigen::all);
    xv.rowwise() -= xmean;
    fits[f].emplace(FoldFit{detail::GroupLassoSolver(std::move(xt), std::move(yt), full.widths),
                            std::move(xv), y(test), ymean});
  }

  // Folds advance along the grid together. The path stops after the first
  // grid point at which some fold's fit uses as many columns as it has rows;
  // beyond that point the fits interpolate their training rows.
  std::vector<std::vector<double>> fold_sse(options.n_folds, std::vector<double>(grid, 0.0));
  std::vector<char> fold_converged(options.n_folds, 1);
  std::vector<char> fold_saturated(options.n_folds, 0);
  std::size_t evaluated = 0;
  for (std::size_t k = 0; k < grid; ++k) {
    parallel_for(options.n_folds, options.threads, [&](std::size_t f) {
      if (!fits[f]) return;
      FoldFit& ff = *fits[f];
      const auto o = ff.solver.solve(path.values[k], options.solver);
      fold_converged[f] = o.converged ? 1 : 0;
      fold_saturated[f] = ff.solver.active_columns() >= ff.solver.rows() ? 1 : 0;
      const Vector pred = (ff.xv * ff.solver.beta()).array() + ff.ymean;
      fold_sse[f][k] = (ff.yv - pred).squaredNorm();
    });
    evaluated = k + 1;
    bool saturated = false;
    for (std::size_t f = 0; f < options.n_folds; ++f) {
      if (!fits[f]) continue;
      if (!fold_converged[f]) ++result.nonconverged;
      saturated = saturated || fold_saturated[f];
    }
    if (saturated && options.stop_at_saturation) break;
  }
  if (evaluated < grid) {
    result.truncated = true;
    path.values.resize(evaluated);
  }
  const std::size_t points = evaluated;

  path.cv_errors.assign(points, 0.0);
  path.cv_se.assign(points, 0.0);
  std::size_t used = 0;
  for (std::size_t f = 0; f < options.n_folds; ++f) used += fold_size[f] > 0 ? 1 : 0;
  for (std::size_t k = 0; k < points; ++k) {
    double sse = 0.0;
    for (std::size_t f = 0; f < options.n_folds; ++f) sse += fold_sse[f][k];
    path.cv_errors[k] = sse / static_cast<double>(n);
    if (used > 1) {
      double ss = 0.0;
      for (std::size_t f = 0; f < options.n_folds; ++f) {
        if (fold_size[f] == 0) continue;
        const double e = fold_sse[f][k] / static_cast<double>(fold_size[f]) - path.cv_errors[k];
        ss += e * e;
      }
      path.cv_se[k] = std::sqrt(ss / static_cast<double>(used - 1) / static_cast<double>(used));
    }
  }
  path.selected = static_cast<std::size_t>(
      std::min_element(path.cv_errors.begin(), path.cv_errors.end()) - path.cv_errors.begin());
  if (options.one_se_rule) {
    const double limit = path.cv_errors[path.selected] + path.cv_se[path.selected];
    for (std::size_t k = 0; k < path.selected; ++k) {
      if (path.cv_errors[k] <= limit) {
        path.selected = k;
        break;
      }
    }
  }

  detail::GroupLassoSolver solver(std::move(full.x), yc, full.widths);
  for (std::size_t k = 0; k <= path.selected; ++k) {
    const auto o = solver.solve(path.values[k], options.solver);
    if (k == path.selected) result.converged = o.converged;
  }
  result.model = detail::assemble_model(candidates, solver.beta(), ybar, path.values[path.selected]);
  return result;
}

}  // namespace inis
