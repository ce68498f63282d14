#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "inis/common.hpp"
#include "inis/dataset.hpp"
#include "inis/parallel.hpp"
#include "inis/spline_basis.hpp"

namespace inis {

// A Gram matrix (1/n) B^T B whose smallest eigenvalue falls below this is
// treated as singular.
inline constexpr double kSingularGramTolerance = 1e-10;

struct MarginalFit {
  std::size_t index = 0;
  Vector coefficients;    // on the centered fitting block
  double norm_sq = 0.0;   // (1/n) sum of squared fitted values
  double rss = 0.0;       // (1/n) sum of squared residuals
  double intercept = 0.0; // mean of y
  bool degenerate = false;
};

struct JointFit {
  std::vector<Vector> coefficients;  // one segment per block
  double intercept = 0.0;
  double rss = 0.0;
  Vector fitted;  // including the intercept
};

namespace detail {

inline Vector centered(const Vector& y) { return (y.array() - y.mean()).matrix(); }

// Solves G beta = b for symmetric G; throws SingularGram when the smallest
// eigenvalue is below tolerance.
inline Vector solve_gram(const Matrix& gram, const Vector& rhs) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& lambda = eig.eigenvalues();
  if (lambda.size() > 0 && !(lambda[0] >= kSingularGramTolerance)) {
    throw Error(ErrorCode::SingularGram,
                "smallest Gram eigenvalue " + std::to_string(lambda[0]));
  }
  const Matrix& v = eig.eigenvectors();
  Vector proj = v.transpose() * rhs;
  proj.array() /= lambda.array();
  return v * proj;
}

// b^T G^{-1} b, or nullopt when G is singular.
inline std::optional<double> quadratic_score(const Matrix& gram, const Vector& rhs) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& lambda = eig.eigenvalues();
  if (!(lambda[0] >= kSingularGramTolerance)) return std::nullopt;
  const Vector proj = eig.eigenvectors().transpose() * rhs;
  return (proj.array().square() / lambda.array()).sum();
}

}  // namespace detail

// Least-squares fit of centered y on one centered block.
inline MarginalFit fit_marginal(const Vector& y, const BasisBlock& block) {
  require(y.size() == block.rows(), ErrorCode::InvalidArgument, "block/response size mismatch");
  const auto n = static_cast<double>(y.size());
  const Vector yc = detail::centered(y);
  const Matrix gram = block.values.transpose() * block.values / n;
  const Vector rhs = block.values.transpose() * yc / n;

  MarginalFit fit;
  fit.intercept = y.mean();
  fit.coefficients = detail::solve_gram(gram, rhs);
  const Vector fitted = block.values * fit.coefficients;
  fit.norm_sq = fitted.squaredNorm() / n;
  fit.rss = (yc - fitted).squaredNorm() / n;
  return fit;
}

// Joint least squares of centered y on the horizontally stacked blocks.
inline JointFit fit_joint(const Vector& y, std::span<const BasisBlock> blocks) {
  const auto n = static_cast<double>(y.size());
  const Vector yc = detail::centered(y);
  Eigen::Index total = 0;
  for (const auto& b : blocks) {
    require(b.rows() == y.size(), ErrorCode::InvalidArgument, "block/response size mismatch");
    total += b.width();
  }
  require(total <= y.size() - 1, ErrorCode::SingularGram,
          "more columns than observations allow");

  JointFit fit;
  fit.intercept = y.mean();
  if (total == 0) {
    fit.rss = yc.squaredNorm() / n;
    fit.fitted = Vector::Constant(y.size(), fit.intercept);
    return fit;
  }
  Matrix stacked(y.size(), total);
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    stacked.middleCols(col, b.width()) = b.values;
    col += b.width();
  }
  const Matrix gram = stacked.transpose() * stacked / n;
  const Vector rhs = stacked.transpose() * yc / n;
  const Vector beta = detail::solve_gram(gram, rhs);
  const Vector fitted = stacked * beta;
  fit.rss = (yc - fitted).squaredNorm() / n;
  fit.fitted = fitted.array() + fit.intercept;
  col = 0;
  for (const auto& b : blocks) {
    fit.coefficients.push_back(beta.segment(col, b.width()));
    col += b.width();
  }
  return fit;
}

// Spline bases and centered fitting blocks for every covariate of a design,
// stored side by side so that screening passes run as a few dense products.
class BasisDesign {
 public:
  static BasisDesign build(const Matrix& covariates, int dim, int degree,
                           std::size_t threads = 1) {
    require(dim >= 2, ErrorCode::InvalidDimension, "dim must be >= 2");
    BasisDesign d;
    d.dim_ = dim;
    d.degree_ = degree;
    const auto n = covariates.rows();
    const auto p = static_cast<std::size_t>(covariates.cols());
    const Eigen::Index w = dim - 1;
    d.stacked_ = Matrix::Zero(n, static_cast<Eigen::Index>(p) * w);
    d.bases_.resize(p);
    d.means_.assign(p, Vector::Zero(w));
    d.grams_.assign(p, Matrix::Zero(w, w));
    d.degenerate_.assign(p, 0);
    parallel_for(p, threads, [&](std::size_t j) {
      const auto col = static_cast<Eigen::Index>(j);
      const std::span<const double> x(covariates.col(col).data(), static_cast<std::size_t>(n));
      try {
        SplineBasis basis = build_basis(x, dim, degree);
        BasisBlock block = fitting_block(basis, x);
        Matrix gram = block.values.transpose() * block.values / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues()[0] >= kSingularGramTolerance)) {
          d.degenerate_[j] = 1;
          return;
        }
        d.stacked_.middleCols(col * w, w) = block.values;
        d.means_[j] = std::move(block.column_means);
        d.grams_[j] = std::move(gram);
        d.bases_[j] = std::move(basis);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooFewDistinctValues) throw;
        d.degenerate_[j] = 1;
      }
    });
    return d;
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(stacked_.rows()); }
  std::size_t p() const noexcept { return bases_.size(); }
  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }
  Eigen::Index width() const noexcept { return dim_ - 1; }

  bool degenerate(std::size_t j) const { return degenerate_[j] != 0; }
  std::size_t degenerate_count() const {
    std::size_t c = 0;
    for (auto f : degenerate_) c += f;
    return c;
  }
  const SplineBasis& basis(std::size_t j) const { return bases_[j]; }
  const Matrix& gram(std::size_t j) const { return grams_[j]; }
  const Matrix& stacked() const noexcept { return stacked_; }

  auto values(std::size_t j) const {
    return stacked_.middleCols(static_cast<Eigen::Index>(j) * width(), width());
  }

  BasisBlock block(std::size_t j) const { return BasisBlock{values(j), means_[j]}; }

 private:
  int dim_ = 0;
  int degree_ = 0;
  Matrix stacked_;
  std::vector<SplineBasis> bases_;
  std::vector<Vector> means_;
  std::vector<Matrix> grams_;
  std::vector<char> degenerate_;
};

struct MarginalFits {
  std::vector<MarginalFit> fits;
  std::size_t degenerate_count = 0;
};

// fit_marginal for every covariate. Degenerate covariates (too few distinct
// values or a singular Gram matrix) get a zero fit with the degenerate flag.
inline MarginalFits fit_all_marginals(const Dataset& data, int dim, int degree,
                                      std::size_t threads = 1) {
  data.validate();
  require(data.n() >= 2 * static_cast<std::size_t>(dim), ErrorCode::InvalidData,
          "need n >= 2*dim observations");
  MarginalFits out;
  out.fits.resize(data.p());
  const Vector y = data.response;
  parallel_for(data.p(), threads, [&](std::size_t j) {
    MarginalFit& fit = out.fits[j];
    try {
      const auto x = data.column(j);
      const SplineBasis basis = build_basis(x, dim, degree);
      fit = fit_marginal(y, fitting_block(basis, x));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewDistinctValues && e.code() != ErrorCode::SingularGram) {
        throw;
      }
      fit = MarginalFit{};
      fit.coefficients = Vector::Zero(dim - 1);
      fit.intercept = y.mean();
      fit.rss = (y.array() - y.mean()).square().mean();
      fit.degenerate = true;
    }
    fit.index = j;
  });
  for (const auto& f : out.fits) out.degenerate_count += f.degenerate ? 1 : 0;
  return out;
}

// Scores every covariate by the drop in mean squared residual obtained when its
// block is added to the joint fit on `active`. Implemented by projecting onto
// the orthogonal complement of the active span, which is algebraically the
// same as a fit_joint per candidate.
class ConditionalScorer {
 public:
  ConditionalScorer(const BasisDesign& design, const Vector& y, IndexSet active)
      : design_(&design), active_(std::move(active)) {
    const auto n = static_cast<Eigen::Index>(design.n());
    const Vector yc = detail::centered(y);
    std::vector<std::size_t> usable;
    for (auto j : active_) {
      if (!design.degenerate(j)) usable.push_back(j);
    }
    const Eigen::Index w = design.width();
    if (!usable.empty()) {
      Matrix a(n, static_cast<Eigen::Index>(usable.size()) * w);
      for (std::size_t k = 0; k < usable.size(); ++k) {
        a.middleCols(static_cast<Eigen::Index>(k) * w, w) = design.values(usable[k]);
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(a);
      qr.setThreshold(1e-10);
      const Eigen::Index rank = qr.rank();
      q_ = qr.householderQ() * Matrix::Identity(n, rank);
    } else {
      q_ = Matrix(n, 0);
    }
    residual_ = yc - q_ * (q_.transpose() * yc);
    active_rss_ = residual_.squaredNorm() / static_cast<double>(n);
  }

  const BasisDesign& design() const noexcept { return *design_; }
  double active_rss() const noexcept { return active_rss_; }
  const IndexSet& active() const noexcept { return active_; }

  // Scores for all p covariates; entries for active or degenerate covariates
  // are 0. With `permutation`, row i of every non-active covariate is replaced
  // by its row permutation[i] while active covariates keep their alignment.
  std::vector<double> scores(const std::vector<std::size_t>* permutation = nullptr,
                             std::size_t threads = 1) const {
    const BasisDesign& d = *design_;
    const auto n = static_cast<Eigen::Index>(d.n());
    const double nn = static_cast<double>(n);
    Vector r = residual_;
    Matrix q = q_;
    if (permutation != nullptr) {
      require(permutation->size() == d.n(), ErrorCode::InvalidArgument, "permutation size");
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto dst = static_cast<Eigen::Index>((*permutation)[static_cast<std::size_t>(i)]);
        r[dst] = residual_[i];
        q.row(dst) = q_.row(i);
      }
    }
    const Vector cross = d.stacked().transpose() * r;
    Matrix proj;
    if (q.cols() > 0) proj = q.transpose() * d.stacked();
    const Eigen::Index w = d.width();
    std::vector<double> out(d.p(), 0.0);
    parallel_for(d.p(), threads, [&](std::size_t j) {
      if (d.degenerate(j) || contains(active_, j)) return;
      const Eigen::Index off = static_cast<Eigen::Index>(j) * w;
      Matrix gram = d.gram(j);
      if (q.cols() > 0) {
        const auto m = proj.middleCols(off, w);
        gram.noalias() -= m.transpose() * m / nn;
      }
      const Vector rhs = cross.segment(off, w) / nn;
      const auto s = detail::quadratic_score(gram, rhs);
      out[j] = s ? std::max(0.0, *s) : 0.0;
    });
    return out;
  }

 private:
  const BasisDesign* design_;
  IndexSet active_;
  Matrix q_;
  Vector residual_;
  double active_rss_ = 0.0;
};

}  // namespace inis
