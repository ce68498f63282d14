#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "inis/common.hpp"
#include "inis/dataset.hpp"
#include "inis/rng.hpp"

namespace inis {

inline double g1(double x) { return x; }
inline double g2(double x) { return (2.0 * x - 1.0) * (2.0 * x - 1.0); }
inline double g3(double x) {
  const double s = std::sin(2.0 * std::numbers::pi * x);
  return s / (2.0 - s);
}
inline double g4(double x) {
  const double s = std::sin(2.0 * std::numbers::pi * x);
  const double c = std::cos(2.0 * std::numbers::pi * x);
  return 0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c * c * c + 0.5 * s * s * s;
}

inline std::array<double, 4> component_functions(double x) { return {g1(x), g2(x), g3(x), g4(x)}; }

// One of the six benchmark designs. Parameters not used by an example are
// ignored: s (Example 1), t (Examples 3, 4, 6), c_squared (Example 6).
struct SimulationSpec {
  int example = 3;
  int s = 3;
  int t = 0;
  double c_squared = 1.0;
  std::size_t n = 400;
  std::size_t p = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    require(example >= 1 && example <= 6, ErrorCode::InvalidSpec, "example must be 1..6");
    require(n >= 2, ErrorCode::InvalidSpec, "n must be >= 2");
    if (example == 1) {
      require(s == 3 || s == 6 || s == 12 || s == 24, ErrorCode::InvalidSpec,
              "Example 1 needs s in {3, 6, 12, 24}");
    }
    if (example == 3 || example == 4 || example == 6) {
      require(t == 0 || t == 1, ErrorCode::InvalidSpec, "t must be 0 or 1");
    }
    if (example == 6) {
      require(c_squared == 2.0 || c_squared == 1.0 || c_squared == 0.5 || c_squared == 0.25,
              ErrorCode::InvalidSpec, "Example 6 needs C^2 in {2, 1, 0.5, 0.25}");
    }
    require(p >= min_p(), ErrorCode::InvalidSpec,
            "p must be >= " + std::to_string(min_p()) + " for example " + std::to_string(example));
  }

  // Fewest covariates that still contain the whole construction.
  std::size_t min_p() const {
    switch (example) {
      case 1: return 50 + static_cast<std::size_t>(s);
      case 2: return 3;
      case 4: return 12;
      default: return 4;
    }
  }

  IndexSet truth() const {
    std::size_t k = 4;
    if (example == 1) k = static_cast<std::size_t>(s);
    if (example == 2) k = 3;
    if (example == 4) k = 12;
    IndexSet out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = j;
    return out;
  }

  double noise_variance() const {
    switch (example) {
      case 1:
      case 2: return 3.0;
      case 3: return 1.74;
      case 4: return 0.5184;
      case 5: return 1.0;
      default: return c_squared * 3.3843;
    }
  }
};

struct SimulatedData {
  Dataset train;
  Dataset test;  // n/2 rows from the same law, independent draws
  IndexSet truth;
};

namespace detail {

inline Matrix draw_covariates(const SimulationSpec& spec, std::size_t rows, std::size_t p,
                              Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(rows);
  Matrix x(n, static_cast<Eigen::Index>(p));
  auto fill_normal = [&](Eigen::Index j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  };
  switch (spec.example) {
    case 1: {
      const auto constructed = static_cast<Eigen::Index>(p) - 50;
      for (Eigen::Index j = 0; j < constructed; ++j) fill_normal(j);
      const double mix = std::sqrt(1.0 - spec.s / 25.0);
      for (Eigen::Index k = constructed; k < static_cast<Eigen::Index>(p); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
          double v = 0.0;
          for (int j = 0; j < spec.s; ++j) v += (j % 2 == 0 ? 1.0 : -1.0) * x(i, j) / 5.0;
          x(i, k) = v + mix * normal(rng);
        }
      }
      break;
    }
    case 2: {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) fill_normal(j);
      // X2 = -X1^3/3 + noise; the standard normal already drawn in column 1
      // serves as the noise term.
      for (Eigen::Index i = 0; i < n; ++i) x(i, 1) += -std::pow(x(i, 0), 3) / 3.0;
      break;
    }
    case 3:
    case 4:
    case 6: {
      Vector u(n);
      for (Eigen::Index i = 0; i < n; ++i) u[i] = unif(rng);
      const double t = spec.t;
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = (unif(rng) + t * u[i]) / (1.0 + t);
      }
      break;
    }
    case 5: {
      // Factor construction: X4 = Z0 and X_j = (Z0 + Z_j)/sqrt(2) otherwise,
      // which gives unit variances, corr(X_j, X4) = 1/sqrt(2) and
      // corr(X_i, X_j) = 1/2 among the rest.
      Vector z0(n);
      for (Eigen::Index i = 0; i < n; ++i) z0[i] = normal(rng);
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
        if (j == 3) {
          x.col(j) = z0;
          continue;
        }
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = (z0[i] + normal(rng)) / std::numbers::sqrt2;
      }
      break;
    }
    default: throw Error(ErrorCode::InvalidSpec, "unknown example");
  }
  return x;
}

}  // namespace detail

// Each true component's contribution to the regression function, one column
// per covariate of spec.truth().
inline Matrix signal_components(const SimulationSpec& spec, const Matrix& x) {
  const IndexSet truth = spec.truth();
  Matrix out(x.rows(), static_cast<Eigen::Index>(truth.size()));
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    const auto col = x.col(j);
    auto dst = out.col(j);
    switch (spec.example) {
      case 1: dst = (k % 2 == 0 ? 1.0 : -1.0) * col; break;
      case 2: dst = col; break;
      case 3: {
        static constexpr double coef[4] = {5.0, 3.0, 4.0, 6.0};
        for (Eigen::Index i = 0; i < x.rows(); ++i) dst[i] = coef[k] * component_functions(col[i])[k];
        break;
      }
      case 4: {
        const double coef = k < 4 ? 1.0 : (k < 8 ? 1.5 : 2.0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) dst[i] = coef * component_functions(col[i])[k % 4];
        break;
      }
      case 5: {
        const double coef = k < 3 ? 2.0 : -3.0 * std::numbers::sqrt2;
        dst = coef * col;
        break;
      }
      case 6: {
        static constexpr double coef[4] = {3.0, 3.0, 2.0, 2.0};
        for (Eigen::Index i = 0; i < x.rows(); ++i) dst[i] = coef[k] * component_functions(col[i])[k];
        break;
      }
      default: throw Error(ErrorCode::InvalidSpec, "unknown example");
    }
  }
  return out;
}

namespace detail {

inline Dataset draw_dataset(const SimulationSpec& spec, std::size_t rows, Rng& rng) {
  Matrix x = draw_covariates(spec, rows, spec.p, rng);
  const Matrix comps = signal_components(spec, x);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(spec.noise_variance());
  Vector y = comps.rowwise().sum();
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * normal(rng);
  return make_dataset(std::move(x), std::move(y));
}

}  // namespace detail

// Training set of size n and test set of size n/2, from independent streams
// derived from spec.seed.
inline SimulatedData generate(const SimulationSpec& spec) {
  spec.validate();
  SimulatedData out;
  Rng train_rng(split_seed(spec.seed, 0));
  Rng test_rng(split_seed(spec.seed, 1));
  out.train = detail::draw_dataset(spec, spec.n, train_rng);
  out.test = detail::draw_dataset(spec, std::max<std::size_t>(1, spec.n / 2), test_rng);
  out.truth = spec.truth();
  return out;
}

struct SnrResult {
  double overall = 0.0;                    // var(m(X)) / var(eps)
  std::vector<double> component_variances; // var(component_j)
  std::vector<double> component_snr;       // var(component_j) / var(eps)
};

// Signal-to-noise summary of a matrix of component draws (one column per
// component, one row per draw).
inline SnrResult signal_to_noise(const Matrix& components, double noise_variance) {
  require(noise_variance > 0.0, ErrorCode::InvalidArgument, "noise variance must be positive");
  require(components.rows() >= 2, ErrorCode::InvalidArgument, "need at least 2 draws");
  SnrResult r;
  const double denom = static_cast<double>(components.rows() - 1);
  auto variance = [&](const Vector& v) { return (v.array() - v.mean()).square().sum() / denom; };
  for (Eigen::Index j = 0; j < components.cols(); ++j) {
    const double v = variance(components.col(j));
    r.component_variances.push_back(v);
    r.component_snr.push_back(v / noise_variance);
  }
  r.overall = components.cols() == 0 ? 0.0 : variance(components.rowwise().sum()) / noise_variance;
  return r;
}

// Monte Carlo SNR of a design from `draws` covariate draws (noise not drawn).
inline SnrResult snr(const SimulationSpec& spec, std::size_t draws = 1'000'000) {
  SimulationSpec minimal = spec;
  minimal.p = spec.min_p();
  minimal.validate();
  require(draws >= 2, ErrorCode::InvalidArgument, "need at least 2 draws");
  Rng rng(split_seed(spec.seed, 2));
  const std::size_t k = minimal.truth().size();
  // Column k holds the total signal.
  std::vector<long double> sum(k + 1, 0.0L), sum_sq(k + 1, 0.0L);
  constexpr std::size_t kChunk = 50'000;
  for (std::size_t done = 0; done < draws; done += kChunk) {
    const std::size_t rows = std::min(kChunk, draws - done);
    const Matrix comps = signal_components(minimal, detail::draw_covariates(minimal, rows, minimal.p, rng));
    for (Eigen::Index i = 0; i < comps.rows(); ++i) {
      long double total = 0.0L;
      for (std::size_t j = 0; j < k; ++j) {
        const long double v = comps(i, static_cast<Eigen::Index>(j));
        sum[j] += v;
        sum_sq[j] += v * v;
        total += v;
      }
      sum[k] += total;
      sum_sq[k] += total * total;
    }
  }
  const auto nd = static_cast<long double>(draws);
  auto variance = [&](std::size_t j) {
    return static_cast<double>((sum_sq[j] - sum[j] * sum[j] / nd) / (nd - 1.0L));
  };
  SnrResult r;
  const double noise = spec.noise_variance();
  for (std::size_t j = 0; j < k; ++j) {
    r.component_variances.push_back(variance(j));
    r.component_snr.push_back(variance(j) / noise);
  }
  r.overall = variance(k) / noise;
  return r;
}

}  // namespace inis
