#include "cpic/evalkit.hpp"
#include "cpic/lorenz.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cpic;

namespace {

LorenzParams short_run(int steps = 3000) {
  LorenzParams p;
  p.steps = steps;
  p.burn_in = 500;
  return p;
}

Matrix covariance(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows());
}

}  // namespace

TEST(Lorenz, DerivativeAtOnes) {
  const Eigen::Vector3d d = lorenz_derivative(Eigen::Vector3d::Ones(), LorenzParams{});
  EXPECT_NEAR(d(0), 0.0, 1e-15);
  EXPECT_NEAR(d(1), 26.0, 1e-15);
  EXPECT_NEAR(d(2), -5.0 / 3.0, 1e-14);
}

TEST(Lorenz, FixedPointHasZeroDerivative) {
  const LorenzParams p;
  const double r = std::sqrt(p.b * (p.rho - 1.0));
  EXPECT_LT(lorenz_derivative(Eigen::Vector3d(r, r, p.rho - 1.0), p).norm(), 1e-12);
}

TEST(Lorenz, IntegrationShapeAndBoundedness) {
  const Series s = integrate_lorenz(short_run());
  EXPECT_EQ(s.length(), 2500);
  EXPECT_EQ(s.channels(), 3);
  EXPECT_LT(s.data.cwiseAbs().maxCoeff(), 60.0);
  EXPECT_GT(s.data.col(2).minCoeff(), 0.0);
}

TEST(Lorenz, NearbyTrajectoriesDiverge) {
  LorenzParams a = short_run(4000), b = a;
  b.initial[0] += 1e-8;
  const Series sa = integrate_lorenz(a), sb = integrate_lorenz(b);
  EXPECT_LT((sa.data.row(0) - sb.data.row(0)).norm(), 1e-3);
  EXPECT_GT((sa.data.bottomRows(200) - sb.data.bottomRows(200)).rowwise().norm().maxCoeff(), 1.0);
}

TEST(Lorenz, InvalidParamsThrow) {
  LorenzParams p;
  p.burn_in = p.steps;
  EXPECT_THROW(integrate_lorenz(p), std::invalid_argument);
  p = LorenzParams{};
  p.dt = 0.0;
  EXPECT_THROW(integrate_lorenz(p), std::invalid_argument);
}

TEST(Lift, EmbeddingIsOrthonormalAndRankThree) {
  const Series latents = integrate_lorenz(short_run());
  const Lifted lifted = lift(latents, 30, 4);
  EXPECT_LT((lifted.embedding.transpose() * lifted.embedding - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance(lifted.series.data));
  const Vector ev = eig.eigenvalues();
  EXPECT_LT(ev(26), 1e-9 * ev(29));
  EXPECT_GT(ev(27), 1e-3 * ev(29));
}

TEST(Lift, PcaRecoversNoiselessLatents) {
  const Series latents = integrate_lorenz(short_run());
  const Lifted lifted = lift(latents, 30, 5);
  const PcaResult pca = pca_project(lifted.series.data, 3);
  EXPECT_NEAR(align_r2(pca.scores, latents.data).r2, 1.0, 1e-6);
}

TEST(Corrupt, AchievesRequestedSnr) {
  const Lifted lifted = lift(integrate_lorenz(short_run()), 30, 6);
  for (double snr : {0.001, 0.0129, 0.1, 2.0}) {
    const Corrupted c = corrupt(lifted.series, snr, 7);
    EXPECT_NEAR(c.achieved_snr / snr, 1.0, 1e-6);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.noise_cov);
    EXPECT_NEAR(c.signal_top_eigenvalue / eig.eigenvalues().maxCoeff(), snr, 1e-6 * snr);
  }
}

TEST(Corrupt, NoiseSpectrumDecays) {
  const Lifted lifted = lift(integrate_lorenz(short_run()), 10, 6);
  const Corrupted c = corrupt(lifted.series, 0.1, 8);
  const Vector& ev = c.noise_eigenvalues;
  for (Index k = 0; k < 10; ++k)
    EXPECT_NEAR(ev(9 - k) / ev(9), std::exp(-2.0 * k / kNoiseDecay), 1e-9);
}

TEST(Corrupt, HugeSnrLeavesSignalIntact) {
  const Lifted lifted = lift(integrate_lorenz(short_run()), 30, 6);
  const Corrupted c = corrupt(lifted.series, 1e12, 9);
  EXPECT_LT((c.series.data - lifted.series.data).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Corrupt, SampleNoiseCovarianceMatches) {
  LorenzParams p = short_run(50500);
  const Lifted lifted = lift(integrate_lorenz(p), 10, 6);
  const Corrupted c = corrupt(lifted.series, 0.01, 10);
  const Matrix empirical = covariance(c.series.data - lifted.series.data);
  EXPECT_LT((empirical - c.noise_cov).norm() / c.noise_cov.norm(), 0.05);
}

TEST(Corrupt, RejectsNonPositiveSnr) {
  const Lifted lifted = lift(integrate_lorenz(short_run()), 5, 6);
  EXPECT_THROW(corrupt(lifted.series, 0.0, 1), std::invalid_argument);
}

TEST(SnrGrid, EndpointsAndRatios) {
  const auto grid = snr_grid();
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_NEAR(grid.front(), 0.001, 1e-15);
  EXPECT_NEAR(grid.back(), 0.1, 1e-15);
  EXPECT_NEAR(grid[4], 0.00774263682681127, 1e-12);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(10.0, 2.0 / 9.0), 1e-12);
}

TEST(SnrGrid, Labels) {
  EXPECT_EQ(snr_label(0.001), "0.001");
  EXPECT_EQ(snr_label(0.1), "0.1");
  EXPECT_EQ(snr_label(snr_grid()[1]), "0.00167");
  EXPECT_EQ(snr_label(snr_grid()[4]), "0.00774");
}

TEST(Benchmark, SameSeedSameData) {
  const LorenzParams p = short_run();
  const auto a = make_lorenz_benchmark(p, 8, 0.05, 3), b = make_lorenz_benchmark(p, 8, 0.05, 3);
  EXPECT_EQ(a.noisy.series.data, b.noisy.series.data);
  EXPECT_NE(make_lorenz_benchmark(p, 8, 0.05, 4).noisy.series.data, a.noisy.series.data);
  EXPECT_LT(a.latents.data.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
}
