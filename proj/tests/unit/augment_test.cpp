#include <gtest/gtest.h>

#include <cmath>

#include "lipcert/augment.hpp"
#include "lipcert/errors.hpp"

using namespace lipcert;
using namespace lipcert::augment;

TEST(Spec, EffectiveVariance) {
  EXPECT_DOUBLE_EQ(AugmentSpec::noise(0.3).effective_variance(), 0.09);
  EXPECT_DOUBLE_EQ(AugmentSpec::translate(2).effective_variance(), 2.0);
  EXPECT_NEAR(AugmentSpec::translate(4).effective_variance(), 20.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(AugmentSpec::translate(8).effective_variance(), 24.0);
  EXPECT_THROW(AugmentSpec::noise(-1.0).validate(), InvalidParameter);
}

TEST(Noise, ReplicaLayoutAndPerturbations) {
  MatrixXd batch(2, 3);
  batch << 1, 2, 3, 4, 5, 6;
  const auto r = augment::augment(batch, AugmentSpec::noise(0.1, 4), std::uint64_t{9});
  ASSERT_EQ(r.batch.cols(), 12);
  for (Eigen::Index j = 0; j < 3; ++j)
    for (int c = 0; c < 4; ++c) {
      const auto col = j * 4 + c;
      EXPECT_LT((r.batch.col(col) - batch.col(j) - r.perturbations.col(col)).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Noise, ZeroSigmaIsIdentity) {
  const MatrixXd batch = MatrixXd::Random(3, 5);
  EXPECT_EQ(augment::augment(batch, AugmentSpec::noise(0.0), std::uint64_t{1}).batch, batch);
}

TEST(Noise, SameSeedSameBatch) {
  const MatrixXd batch = MatrixXd::Random(2, 10);
  EXPECT_EQ(augment::augment(batch, AugmentSpec::noise(0.5), std::uint64_t{3}).batch,
            augment::augment(batch, AugmentSpec::noise(0.5), std::uint64_t{3}).batch);
}

TEST(Translate, ShiftVarianceMatchesFormula) {
  Rng rng(21);
  for (int s : {2, 4, 8}) {
    const auto shifts = translation_shifts(s, 200000, rng);
    const Eigen::VectorXd dx = shifts.row(0).cast<double>().transpose();
    const double mean = dx.mean();
    const double var = (dx.array() - mean).square().sum() / (dx.size() - 1);
    EXPECT_NEAR(var / AugmentSpec::translate(s).effective_variance(), 1.0, 0.02);
    EXPECT_LE(shifts.cwiseAbs().maxCoeff(), s);
  }
}

TEST(Translate, ShiftImageZeroPads) {
  Eigen::VectorXd img = Eigen::VectorXd::Zero(16);
  img(0) = 1.0;  // row 0, col 0 of a 4x4 grid
  const auto right = shift_image(img, GridShape{4, 4}, 1, 0);
  EXPECT_EQ(right(1), 1.0);
  EXPECT_EQ(right.sum(), 1.0);
  const auto gone = shift_image(img, GridShape{4, 4}, -1, 0);
  EXPECT_EQ(gone.sum(), 0.0);
}

TEST(Translate, RequiresGrid) {
  const MatrixXd batch = MatrixXd::Zero(64, 2);
  EXPECT_THROW(augment::augment(batch, AugmentSpec::translate(2), std::uint64_t{1}), InvalidParameter);
  EXPECT_NO_THROW(augment::augment(batch, AugmentSpec::translate(2), std::uint64_t{1}, GridShape{8, 8}));
}

TEST(Sprites, BinaryAndNonEmpty) {
  Rng rng(2);
  const MatrixXd s = sprite_dataset(50, rng);
  ASSERT_EQ(s.rows(), 64);
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    EXPECT_GE(s.col(j).sum(), 4.0);
    EXPECT_TRUE(((s.col(j).array() == 0.0) || (s.col(j).array() == 1.0)).all());
  }
}

TEST(Hutchinson, ConvergesOnFixedMatrix) {
  Eigen::Matrix3d a;
  a << 2, -1, 0, 0.5, 3, 1, -2, 0, 1;
  const MatVec mv = [&a](const Eigen::VectorXd& u) -> Eigen::VectorXd { return a * u; };
  const double est = hutchinson_fro_sq(mv, 3, 200000, 5);
  EXPECT_NEAR(est / a.squaredNorm(), 1.0, 0.02);
}

TEST(Hutchinson, UnbiasedGrandMean) {
  Eigen::Matrix2d a;
  a << 1, 2, 3, 4;
  const MatVec mv = [&a](const Eigen::VectorXd& u) -> Eigen::VectorXd { return a * u; };
  const int reps = 300;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double e = hutchinson_fro_sq(mv, 2, 50, 1000 + r);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum_sq - reps * mean * mean) / (reps - 1) / reps);
  EXPECT_LE(std::abs(mean - a.squaredNorm()), 3 * se);
}

TEST(Density, GradientsMatchDifferences) {
  const GaussianMixture mix({0.3, 0.7}, {Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 2.0)},
                            {0.5, 1.0});
  const PlateauDensity plateau(1.0, 0.3);
  for (const Density* p : std::initializer_list<const Density*>{&mix, &plateau}) {
    for (double x : {-2.0, -0.3, 0.4, 1.2, 2.5}) {
      Eigen::VectorXd v(1), up(1), down(1);
      v << x;
      up << x + 1e-6;
      down << x - 1e-6;
      EXPECT_NEAR(p->gradient(v)(0), (p->value(up) - p->value(down)) / 2e-6, 1e-6);
    }
  }
}

TEST(Density, MixtureIntegratesToOne) {
  const auto p = GaussianMixture::standard_normal_1d();
  const auto [lo, hi] = p.support();
  const int n = 20000;
  const double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd x(1);
    x << lo + i * h;
    total += (i == 0 || i == n ? 0.5 : 1.0) * p.value(x);
  }
  EXPECT_NEAR(total * h, 1.0, 1e-9);
}

TEST(VarianceIdentity, SlopeTwoAwayFromCriticalPoints) {
  const auto p = GaussianMixture::standard_normal_1d();
  Eigen::VectorXd x(1);
  x << 1.3;
  const auto r = variance_identity_slope(p, x, {1e-3, 1e-2, 1e-1}, 100000, 4);
  EXPECT_NEAR(r.slope, 2.0, 0.1);
  EXPECT_NEAR(r.ratio_at_min_sigma, 1.0, 0.05);
}

TEST(VarianceIdentity, RejectsCriticalPointAndBadGrid) {
  const auto p = GaussianMixture::standard_normal_1d();
  Eigen::VectorXd x(1);
  x << 0.0;
  EXPECT_THROW(variance_identity_slope(p, x, {1e-3, 1e-2}, 100000, 1), DegeneratePoint);
  x << 1.0;
  EXPECT_THROW(variance_identity_slope(p, x, {1e-4, 1e-2}, 100000, 1), InvalidParameter);
  EXPECT_THROW(variance_identity_slope(p, x, {1e-3, 1e-2}, 1000, 1), InvalidParameter);
}

TEST(JsDecay, RatioShrinksWithSigma) {
  const auto rows = js_convolution_decay(GaussianMixture::standard_normal_1d(), {0.1, 0.05, 0.025});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(rows[0].ratio, rows[1].ratio);
  EXPECT_GT(rows[1].ratio, rows[2].ratio);
  EXPECT_LT(rows[2].ratio, 0.5 * rows[0].ratio);
}

TEST(JsDecay, ZeroSigmaGivesZero) {
  const auto rows = js_convolution_decay(GaussianMixture::standard_normal_1d(), {0.1, 0.0});
  EXPECT_NEAR(rows[1].d_js, 0.0, 1e-15);
  EXPECT_EQ(rows[1].ratio, 0.0);
}

TEST(JsDecay, RejectsUnsortedSigmas) {
  EXPECT_THROW(js_convolution_decay(GaussianMixture::standard_normal_1d(), {0.05, 0.1}),
               InvalidParameter);
}

TEST(JsDivergence, SymmetricBoundedAndZeroOnEqual) {
  const int n = 401;
  const double h = 0.05;
  Eigen::VectorXd p(n), q(n);
  for (int i = 0; i < n; ++i) {
    const double x = -10 + i * h;
    p(i) = std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
    q(i) = std::exp(-0.5 * (x - 1) * (x - 1)) / std::sqrt(2 * M_PI);
  }
  EXPECT_NEAR(js_divergence(p, p, h), 0.0, 1e-15);
  const double js = js_divergence(p, q, h);
  EXPECT_NEAR(js, js_divergence(q, p, h), 1e-14);
  EXPECT_GT(js, 0.0);
  EXPECT_LE(js, std::log(2.0));
}

TEST(Experiment, HooksAndDeterminism) {
  gan::GanConfig cfg;
  cfg.d_hidden = {8};
  cfg.g_hidden = {8};
  cfg.steps = 40;
  cfg.telemetry_every = 20;
  cfg.telemetry_batch = 16;
  cfg.energy_samples = 64;
  cfg.batch = 8;
  const std::vector<AugmentSpec> specs{AugmentSpec::noise(0.0), AugmentSpec::noise(0.2)};
  const auto a = da_experiment(cfg, specs, {1, 2}, {}, 1);
  const auto b = da_experiment(cfg, specs, {1, 2}, {}, 2);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t s = 0; s < a.size(); ++s)
    for (std::size_t k = 0; k < a[s].seeds.size(); ++k)
      EXPECT_EQ(a[s].seeds[k].medians.jac_d_x_fro, b[s].seeds[k].medians.jac_d_x_fro);

  // sigma = 0 reproduces a plain run exactly.
  auto plain = cfg;
  plain.seed = 1;
  const auto rows = gan::train(plain).rows;
  EXPECT_EQ(a[0].seeds[0].medians.jac_g_z_fro, gan::final_medians(rows).jac_g_z_fro);

  EXPECT_THROW(make_hooks(AugmentSpec::noise(0.1, 2), {}), InvalidParameter);
}
