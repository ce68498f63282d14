#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace {

inis::BasisBlock random_block(std::size_t n, int dim, std::mt19937_64& rng) {
  const inis::Vector x = testing_util::uniform_vector(n, rng);
  return inis::fitting_block(inis::build_basis(x, dim, inis::default_degree(dim)), x);
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(FitMarginal, ResponseOrthogonalToBlock) {
  // Each row of the raw basis repeats in a mirrored pair, and y flips sign
  // between the pair, so y_c is orthogonal to every centered column.
  std::mt19937_64 rng(1);
  const inis::Vector half = testing_util::uniform_vector(30, rng);
  inis::Vector x(60), y(60);
  std::normal_distribution<double> z;
  for (Eigen::Index i = 0; i < 30; ++i) {
    x[2 * i] = x[2 * i + 1] = half[i];
    y[2 * i] = z(rng);
    y[2 * i + 1] = -y[2 * i];
  }
  const inis::BasisBlock block = inis::fitting_block(inis::build_basis(x, 4, 3), x);
  const inis::MarginalFit fit = inis::fit_marginal(y, block);
  EXPECT_LE(fit.coefficients.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(fit.norm_sq, 1e-24);
  EXPECT_NEAR(fit.rss, (y.array() - y.mean()).square().mean(), 1e-14);
}

TEST(FitMarginal, LinearResponseInSpanIsReproduced) {
  inis::Vector x(6);
  x << 0, 0.2, 0.4, 0.6, 0.8, 1;
  const inis::Vector y = x;
  const inis::SplineBasis basis = inis::build_basis(x, 2, 1);
  const inis::BasisBlock block = inis::fitting_block(basis, x);
  const inis::MarginalFit fit = inis::fit_marginal(y, block);
  EXPECT_NEAR(fit.rss, 0.0, 1e-15);
  const inis::Vector fitted = (block.values * fit.coefficients).array() + fit.intercept;
  EXPECT_LE((fitted - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitMarginal, MatchesNormalEquationsOracleN50) {
  std::mt19937_64 rng(2);
  const inis::BasisBlock block = random_block(50, 5, rng);
  const inis::Vector y = testing_util::normal_vector(50, rng);
  const inis::MarginalFit fit = inis::fit_marginal(y, block);
  const oracle::LeastSquares ref = oracle::least_squares(testing_util::to_rows(block.values), testing_util::to_vec(y));
  for (Eigen::Index k = 0; k < fit.coefficients.size(); ++k) {
    EXPECT_NEAR(fit.coefficients[k], ref.coefficients[std::size_t(k)], 1e-8 * std::max(1.0, std::abs(ref.coefficients[std::size_t(k)])));
  }
  EXPECT_NEAR(fit.rss, ref.rss, 1e-10);
  EXPECT_NEAR(fit.norm_sq, ref.norm_sq, 1e-10);
}

TEST(FitAllMarginals, ConstantCovariateIsDegenerate) {
  std::mt19937_64 rng(3);
  inis::Matrix x = testing_util::uniform_matrix(80, 3, rng);
  x.col(1).setConstant(2.5);
  const inis::Vector y = (3.0 * x.col(0)).array() + testing_util::normal_vector(80, rng).array();
  const auto fits = inis::fit_all_marginals(inis::make_dataset(x, y), 5, 3);
  ASSERT_EQ(fits.fits.size(), 3u);
  EXPECT_EQ(fits.degenerate_count, 1u);
  EXPECT_TRUE(fits.fits[1].degenerate);
  EXPECT_EQ(fits.fits[1].norm_sq, 0.0);
  EXPECT_FALSE(fits.fits[0].degenerate);
  EXPECT_FALSE(fits.fits[2].degenerate);
  EXPECT_GT(fits.fits[0].norm_sq, 0.0);
  EXPECT_EQ(fits.fits[2].index, 2u);
}

TEST(FitAllMarginals, Example2ActiveScoresDominateInactive) {
  int wins = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    inis::SimulationSpec spec;
    spec.example = 2;
    spec.p = 200;
    spec.seed = std::uint64_t(1000 + r);
    const auto data = inis::generate(spec);
    const auto scores = inis::nis_scores(data.train, 5, 3).scores;
    const double inactive = *std::max_element(scores.begin() + 3, scores.end());
    wins += scores[0] > inactive && scores[1] > inactive ? 1 : 0;
  }
  EXPECT_GE(wins, 95);
}

TEST(FitAllMarginals, NullMaximumIsSmallAgainstExample3Signal) {
  std::vector<double> null_max, active;
  for (int r = 0; r < 30; ++r) {
    inis::SimulationSpec spec;
    spec.example = 3;
    spec.p = 200;
    spec.seed = std::uint64_t(2000 + r);
    auto data = inis::generate(spec);
    const auto real = inis::nis_scores(data.train, 5, 3).scores;
    for (int j = 0; j < 4; ++j) active.push_back(real[std::size_t(j)]);
    inis::Rng rng(spec.seed);
    const auto perm = inis::random_permutation(data.train.n(), rng);
    inis::Vector shuffled(data.train.response.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[Eigen::Index(i)] = data.train.response[Eigen::Index(perm[i])];
    data.train.response = shuffled;
    const auto null = inis::nis_scores(data.train, 5, 3).scores;
    null_max.push_back(*std::max_element(null.begin(), null.end()));
  }
  // Population scores of the four components are 2.08, 0.80, 3.30 and 9.43
  // (quadrature), so the active median is near 2.69. The null maximum is
  // about var(Y) times the largest of p chi-square(4) draws over n.
  EXPECT_NEAR(inis::median(active), 2.69, 0.4);
  EXPECT_GE(inis::median(active), 3.0 * inis::median(null_max));
  EXPECT_LE(inis::median(null_max), 1.0);
}

TEST(FitJoint, NoBlocksGivesInterceptOnly) {
  std::mt19937_64 rng(4);
  const inis::Vector y = testing_util::normal_vector(40, rng);
  const inis::JointFit fit = inis::fit_joint(y, {});
  EXPECT_DOUBLE_EQ(fit.intercept, y.mean());
  EXPECT_NEAR(fit.rss, (y.array() - y.mean()).square().sum() / 40.0, 1e-15);
  EXPECT_TRUE(fit.coefficients.empty());
}

TEST(FitJoint, OneBlockMatchesMarginal) {
  std::mt19937_64 rng(5);
  const inis::BasisBlock block = random_block(70, 6, rng);
  const inis::Vector y = testing_util::normal_vector(70, rng);
  const inis::MarginalFit m = inis::fit_marginal(y, block);
  const std::vector<inis::BasisBlock> blocks{block};
  const inis::JointFit j = inis::fit_joint(y, blocks);
  EXPECT_NEAR(j.rss, m.rss, 1e-10);
  EXPECT_LE((j.coefficients[0] - m.coefficients).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitJoint, TwoOrthogonalBlocksMatchOracle) {
  // Blocks on disjoint supports: rows 0..29 carry block A, rows 30..59 block B.
  std::mt19937_64 rng(6);
  inis::Vector xa = testing_util::uniform_vector(60, rng), xb = testing_util::uniform_vector(60, rng);
  xa.tail(30).setZero();
  xb.head(30).setZero();
  xa.head(30).array() += 1.0;
  xb.tail(30).array() += 1.0;
  const inis::Vector y = testing_util::normal_vector(60, rng);
  const inis::BasisBlock a = inis::fitting_block(inis::build_basis(xa, 4, 3), xa);
  const inis::BasisBlock b = inis::fitting_block(inis::build_basis(xb, 4, 3), xb);
  const std::vector<inis::BasisBlock> both{a, b};
  const inis::JointFit joint = inis::fit_joint(y, both);
  const double ra = inis::fit_marginal(y, a).rss, rb = inis::fit_marginal(y, b).rss;
  EXPECT_LE(joint.rss, ra + 1e-10);
  EXPECT_LE(joint.rss, rb + 1e-10);
  const oracle::LeastSquares ref = oracle::least_squares(testing_util::stack_rows(both), testing_util::to_vec(y));
  EXPECT_NEAR(joint.rss, ref.rss, 1e-10);
  EXPECT_NEAR(ra - joint.rss, ra - ref.rss, 1e-10);
}

TEST(FitJoint, TooManyColumnsIsSingular) {
  std::mt19937_64 rng(7);
  std::vector<inis::BasisBlock> blocks;
  for (int k = 0; k < 4; ++k) blocks.push_back(random_block(12, 4, rng));
  const inis::Vector y = testing_util::normal_vector(12, rng);
  try {
    inis::fit_joint(y, blocks);
    FAIL() << "expected SingularGram";
  } catch (const inis::Error& e) {
    EXPECT_EQ(e.code(), inis::ErrorCode::SingularGram);
  }
}

// Sample decomposition mean(y_c^2) = norm_sq + rss over many random fits.
TEST(MarginalProperty, PythagoreanIdentity) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> dims(2, 8);
  std::uniform_int_distribution<std::size_t> sizes(30, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = dims(rng);
    const std::size_t n = std::max<std::size_t>(sizes(rng), std::size_t(2 * dim + 2));
    const inis::BasisBlock block = random_block(n, dim, rng);
    inis::Vector y = testing_util::normal_vector(n, rng) * 3.0;
    y.array() += 10.0 * block.values.col(0).array();
    const inis::MarginalFit fit = inis::fit_marginal(y, block);
    const double total = (y.array() - y.mean()).square().mean();
    ASSERT_LE(relative_gap(fit.norm_sq + fit.rss, total), 1e-8) << "trial " << trial;
  }
}

TEST(MarginalProperty, OracleEquivalenceSmallInstances) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> dims(2, 6);
  std::uniform_int_distribution<std::size_t> sizes(20, 60);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = sizes(rng);
    const int blocks_count = 1 + trial % 3;
    std::vector<inis::BasisBlock> blocks;
    for (int b = 0; b < blocks_count; ++b) blocks.push_back(random_block(n, dims(rng), rng));
    Eigen::Index cols = 0;
    for (const auto& b : blocks) cols += b.width();
    if (cols >= Eigen::Index(n) / 2) blocks.resize(1);
    const inis::Vector y = testing_util::normal_vector(n, rng);
    const oracle::LeastSquares one = oracle::least_squares(testing_util::to_rows(blocks[0].values), testing_util::to_vec(y));
    const inis::MarginalFit m = inis::fit_marginal(y, blocks[0]);
    for (Eigen::Index k = 0; k < m.coefficients.size(); ++k) {
      ASSERT_LE(relative_gap(m.coefficients[k], one.coefficients[std::size_t(k)]), 1e-8) << "trial " << trial;
    }
    ASSERT_LE(relative_gap(m.rss, one.rss), 1e-8);
    const oracle::LeastSquares all = oracle::least_squares(testing_util::stack_rows(blocks), testing_util::to_vec(y));
    const inis::JointFit j = inis::fit_joint(y, blocks);
    ASSERT_LE(relative_gap(j.rss, all.rss), 1e-8) << "trial " << trial;
    std::size_t off = 0;
    for (const auto& c : j.coefficients) {
      for (Eigen::Index k = 0; k < c.size(); ++k) {
        ASSERT_LE(relative_gap(c[k], all.coefficients[off + std::size_t(k)]), 1e-8) << "trial " << trial;
      }
      off += std::size_t(c.size());
    }
  }
}

TEST(MarginalProperty, AddingBlocksNeverIncreasesRss) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<inis::BasisBlock> blocks;
    const inis::Vector y = testing_util::normal_vector(120, rng);
    double previous = inis::fit_joint(y, blocks).rss;
    for (int b = 0; b < 6; ++b) {
      blocks.push_back(random_block(120, 5, rng));
      const double rss = inis::fit_joint(y, blocks).rss;
      ASSERT_LE(rss, previous + 1e-10);
      previous = rss;
    }
  }
}

TEST(MarginalProperty, ScaleEquivariance) {
  std::mt19937_64 rng(11);
  inis::Matrix x = testing_util::uniform_matrix(150, 20, rng);
  inis::Vector y = testing_util::normal_vector(150, rng);
  y.array() += (6.0 * x.col(4).array()).sin();
  const inis::Dataset base = inis::make_dataset(x, y);
  const auto f0 = inis::fit_all_marginals(base, 5, 3);
  for (double c : {-3.0, 0.01, 17.0}) {
    const auto fc = inis::fit_all_marginals(inis::make_dataset(x, y * c), 5, 3);
    std::size_t arg0 = 0, argc = 0;
    for (std::size_t j = 0; j < 20; ++j) {
      EXPECT_LE(relative_gap(fc.fits[j].norm_sq, c * c * f0.fits[j].norm_sq), 1e-10);
      EXPECT_LE(relative_gap(fc.fits[j].rss, c * c * f0.fits[j].rss), 1e-10);
      if (f0.fits[j].norm_sq > f0.fits[arg0].norm_sq) arg0 = j;
      if (fc.fits[j].norm_sq > fc.fits[argc].norm_sq) argc = j;
    }
    EXPECT_EQ(arg0, argc);
  }
}

TEST(MarginalProperty, ThreadCountDoesNotChangeFits) {
  std::mt19937_64 rng(12);
  const inis::Matrix x = testing_util::uniform_matrix(100, 40, rng);
  const inis::Vector y = testing_util::normal_vector(100, rng);
  const auto a = inis::fit_all_marginals(inis::make_dataset(x, y), 5, 3, 1);
  const auto b = inis::fit_all_marginals(inis::make_dataset(x, y), 5, 3, 4);
  for (std::size_t j = 0; j < 40; ++j) {
    EXPECT_EQ(a.fits[j].norm_sq, b.fits[j].norm_sq);
    EXPECT_EQ(a.fits[j].coefficients, b.fits[j].coefficients);
  }
}

TEST(MarginalRegression, TooFewRowsRejected) {
  std::mt19937_64 rng(13);
  const inis::Matrix x = testing_util::uniform_matrix(8, 2, rng);
  const inis::Vector y = testing_util::normal_vector(8, rng);
  EXPECT_THROW(inis::fit_all_marginals(inis::make_dataset(x, y), 5, 3), inis::Error);
}

TEST(BasisDesign, MatchesPerColumnFits) {
  std::mt19937_64 rng(14);
  inis::Matrix x = testing_util::uniform_matrix(90, 6, rng);
  x.col(3).setConstant(1.0);
  const inis::BasisDesign design = inis::BasisDesign::build(x, 5, 3);
  EXPECT_TRUE(design.degenerate(3));
  EXPECT_EQ(design.degenerate_count(), 1u);
  for (std::size_t j : {0u, 1u, 5u}) {
    const auto col = x.col(Eigen::Index(j));
    const inis::Vector xj = col;
    const inis::BasisBlock ref = inis::fitting_block(inis::build_basis(xj, 5, 3), xj);
    EXPECT_EQ(inis::Matrix(design.values(j)), ref.values);
    EXPECT_EQ(design.block(j).column_means, ref.column_means);
  }
}
