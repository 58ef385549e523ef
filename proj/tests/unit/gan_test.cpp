#include <gtest/gtest.h>

#include <cmath>

#include "lipcert/errors.hpp"
#include "lipcert/gan.hpp"
#include "oracles.hpp"

using namespace lipcert;
using namespace lipcert::gan;

namespace {

GanConfig small_config() {
  GanConfig cfg;
  cfg.d_hidden = {8, 8};
  cfg.g_hidden = {8, 8};
  cfg.steps = 60;
  cfg.telemetry_every = 20;
  cfg.telemetry_batch = 32;
  cfg.energy_samples = 128;
  cfg.batch = 16;
  cfg.seed = 4;
  return cfg;
}

double numeric_derivative(const std::function<double(double)>& f, double x) {
  const double h = 1e-6;
  return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST(Measuring, SaturatingConstants) {
  const auto m = MeasuringFunctions::saturating();
  EXPECT_DOUBLE_EQ(m.psi1(0.5), std::log(0.5));
  EXPECT_DOUBLE_EQ(m.L_psi(), 20.0);
  EXPECT_DOUBLE_EQ(m.C(), -std::log(0.05));
}

TEST(Measuring, DerivativesMatchDifferences) {
  for (const auto& m : {MeasuringFunctions::saturating(), MeasuringFunctions::wgan(1.0),
                        MeasuringFunctions::lsgan(), MeasuringFunctions::ebgan(1.0, 2.0)}) {
    for (double x : {0.2, 0.45, 0.8}) {
      EXPECT_NEAR(m.dpsi1(x), numeric_derivative([&](double t) { return m.psi1(t); }, x), 1e-6)
          << to_string(m.kind);
      EXPECT_NEAR(m.dpsi2(x), numeric_derivative([&](double t) { return m.psi2(t); }, x), 1e-6)
          << to_string(m.kind);
    }
  }
}

TEST(Measuring, ParseRoundTrip) {
  for (auto k : {MeasuringKind::Saturating, MeasuringKind::Wgan, MeasuringKind::Lsgan,
                 MeasuringKind::Ebgan}) {
    EXPECT_EQ(parse_measuring_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_measuring_kind("vanilla"), InvalidParameter);
}

TEST(Head, RangeAndDerivative) {
  const DiscriminatorHead h{true, 0.05, 0.95};
  for (double u : {-50.0, -2.0, 0.0, 1.5, 50.0}) {
    const double v = h.apply(u);
    EXPECT_GE(v, 0.05);
    EXPECT_LE(v, 0.95);
    if (!h.clamped(u)) {
      EXPECT_NEAR(h.derivative(u), numeric_derivative([&](double t) { return h.apply(t); }, u),
                  1e-7);
    }
  }
  EXPECT_DOUBLE_EQ(h.lipschitz(), 0.225);
}

TEST(Dataset, SamplesStayInBoxAndRepeat) {
  for (auto kind : {DatasetKind::EightGaussians, DatasetKind::TwoMoons, DatasetKind::Ring}) {
    Dataset d;
    d.kind = kind;
    Rng a(3), b(3);
    const MatrixXd s = d.sample(500, a);
    EXPECT_EQ(s, d.sample(500, b));
    const auto box = d.box();
    for (Eigen::Index j = 0; j < s.cols(); ++j) EXPECT_TRUE(box.contains(s.col(j)));
  }
}

TEST(Dataset, EightGaussiansModes) {
  Dataset d;
  d.radius = 2.0;
  Rng rng(8);
  const MatrixXd s = d.sample(400, rng);
  for (Eigen::Index j = 0; j < s.cols(); ++j) EXPECT_NEAR(s.col(j).norm(), 2.0, 0.2);
}

TEST(EnergyDistance, Properties) {
  Rng rng(1);
  MatrixXd a(2, 200);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  EXPECT_NEAR(energy_distance(a, a), 0.0, 1e-12);
  MatrixXd b = a.array() + 3.0;
  const double shifted = energy_distance(a, b);
  EXPECT_GT(shifted, 1.0);
  EXPECT_NEAR(energy_distance(b, a), shifted, 1e-12);
}

TEST(EnergyDistance, TwoPointClosedForm) {
  MatrixXd x(1, 1), y(1, 1);
  x << 0.0;
  y << 2.0;
  EXPECT_DOUBLE_EQ(energy_distance(x, y), 4.0);
}

TEST(Value, EqualsMeanOfTerms) {
  const auto cfg = small_config();
  const auto d = initial_discriminator(cfg);
  const auto g = initial_generator(cfg);
  Rng rng(2);
  const MatrixXd xs = cfg.dataset.sample(40, rng);
  const MatrixXd zs = sample_noise(2, 40, rng);
  EXPECT_NEAR(gan_value(cfg.measuring, d, g, xs, zs),
              gan_value_terms(cfg.measuring, d, g, xs, zs).mean(), 1e-14);
  Rng pop(5);
  EXPECT_NEAR(gan_value(ValueVariant::EmpEmp, cfg.measuring, d, g, xs, zs, cfg.dataset, pop),
              gan_value(cfg.measuring, d, g, xs, zs), 1e-14);
}

TEST(Value, PopulationVariantsConverge) {
  const auto cfg = small_config();
  const auto d = initial_discriminator(cfg);
  const auto g = initial_generator(cfg);
  Rng rng(6);
  const MatrixXd xs = cfg.dataset.sample(20000, rng);
  const MatrixXd zs = sample_noise(2, 20000, rng);
  Rng pop(7);
  const double emp = gan_value(cfg.measuring, d, g, xs, zs);
  EXPECT_NEAR(gan_value(ValueVariant::PopPop, cfg.measuring, d, g, xs, zs, cfg.dataset, pop, 20000),
              emp, 0.05);
}

TEST(Telemetry, MatchesFiniteDifferences) {
  Rng net_rng(19);
  for (int t = 0; t < 10; ++t) {
    auto cfg = small_config();
    cfg.seed = 100 + t;
    const auto d = initial_discriminator(cfg);
    const auto g = initial_generator(cfg);
    Rng rng(t);
    const MatrixXd xs = cfg.dataset.sample(6, rng);
    const MatrixXd zs = sample_noise(2, 5, rng);
    const auto tel = jacobian_telemetry(d, g, cfg.measuring, xs, zs);

    const MatrixXd fake = nn::forward_batch(g, zs);
    const auto d_of = [&](const Eigen::VectorXd& x) { return d.evaluate(x)(0); };
    double jd = 0.0;
    for (Eigen::Index j = 0; j < xs.cols(); ++j) jd += oracle::numeric_gradient(d_of, xs.col(j), 1e-6).norm();
    for (Eigen::Index j = 0; j < fake.cols(); ++j) jd += oracle::numeric_gradient(d_of, fake.col(j), 1e-6).norm();
    jd /= static_cast<double>(xs.cols() + fake.cols());

    double jg = 0.0, jv = 0.0;
    const auto v_of = [&](const Eigen::VectorXd& z) {
      return cfg.measuring.psi2(1.0 - d.evaluate(nn::forward(g, z))(0));
    };
    for (Eigen::Index j = 0; j < zs.cols(); ++j) {
      jg += nn::finite_diff_jacobian(g, zs.col(j), 1e-6).norm();
      jv += oracle::numeric_gradient(v_of, zs.col(j), 1e-6).norm();
    }
    jg /= static_cast<double>(zs.cols());
    jv /= static_cast<double>(zs.cols());

    EXPECT_NEAR(tel.jac_d_x_fro, jd, 1e-5);
    EXPECT_NEAR(tel.jac_g_z_fro, jg, 1e-5);
    EXPECT_NEAR(tel.jac_v_z_fro, jv, 1e-5);
  }
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  nn::Mlp net(2, {nn::Layer{MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1), nn::Activation::identity()}});
  std::vector<nn::LayerGradient> grads(1);
  grads[0].weights = MatrixXd(1, 2);
  grads[0].weights << 3.0, -0.5;
  grads[0].bias = Eigen::VectorXd::Constant(1, 2.0);
  AdamState adam;
  adam.step(net, grads, 0.01, 0.5, 0.999, 0.0);
  EXPECT_NEAR(net.layer(0).weights(0, 0), -0.01, 1e-15);
  EXPECT_NEAR(net.layer(0).weights(0, 1), 0.01, 1e-15);
  EXPECT_NEAR((*net.layer(0).bias)(0), -0.01, 1e-15);
}

TEST(Config, JsonRoundTripAndValidation) {
  auto cfg = small_config();
  cfg.sn_mode = SnMode::Both;
  const auto text = to_json(cfg).dump();
  const auto back = config_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);

  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"stepz": 3})")), InvalidParameter);
  auto bad = cfg;
  bad.clip_c = 0.01;
  EXPECT_THROW(bad.validate(), InvalidParameter);
  bad = small_config();
  bad.batch = 1;
  EXPECT_THROW(bad.validate(), InvalidParameter);
  bad = small_config();
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), InvalidParameter);
}

TEST(Train, DeterministicRowsAndHeader) {
  const auto cfg = small_config();
  const auto a = train(cfg);
  const auto b = train(cfg);
  ASSERT_FALSE(a.failure);
  EXPECT_EQ(metrics_csv(a.rows), metrics_csv(b.rows));
  EXPECT_EQ(a.rows.size(), 3u);
  EXPECT_EQ(metrics_csv(a.rows).substr(0, metrics_csv(a.rows).find('\n')),
            "step,loss_d,loss_g,jac_d_x_fro,jac_g_z_fro,jac_v_z_fro,energy_distance,lip_cert_d,"
            "lip_cert_g");
}

TEST(Train, SpectralModesKeepLayersWithinCap) {
  for (auto mode : {SnMode::DOnly, SnMode::GOnly, SnMode::Both}) {
    auto cfg = small_config();
    cfg.sn_mode = mode;
    const auto r = train(cfg);
    ASSERT_FALSE(r.failure);
    const bool on_d = mode != SnMode::GOnly;
    const bool on_g = mode != SnMode::DOnly;
    if (on_d) {
      for (const auto& l : r.d.net.layers()) EXPECT_LE(oracle::spectral_norm(l.weights), 1.0 + 1e-6);
    }
    if (on_g) {
      for (const auto& l : r.g.layers()) EXPECT_LE(oracle::spectral_norm(l.weights), 1.0 + 1e-6);
    }
  }
}

TEST(Train, ClippingBoundsEveryWeight) {
  auto cfg = small_config();
  cfg.measuring = MeasuringFunctions::wgan(5.0);
  cfg.clip_c = 0.05;
  const auto r = train(cfg);
  for (const auto& l : r.d.net.layers()) EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Train, ClippingSmallEnoughGivesSubunitCertificate) {
  auto cfg = small_config();
  cfg.measuring = MeasuringFunctions::wgan(5.0);
  cfg.clip_c = 0.05;  // 8 x 8 entries of at most 0.05: Frobenius norm at most 0.4
  const auto r = train(cfg);
  EXPECT_LE(discriminator_certificate(r.d), 1.0);
}

TEST(Medians, FinalFraction) {
  std::vector<MetricsRow> rows;
  for (int s = 1; s <= 10; ++s) {
    MetricsRow r;
    r.step = s * 100;
    r.energy_distance = s;
    rows.push_back(r);
  }
  const auto m = final_medians(rows, 0.2);
  EXPECT_EQ(m.step, 2);
  EXPECT_DOUBLE_EQ(m.energy_distance, 9.5);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
}

TEST(RunBound, FiniteAndUsesCertificates) {
  const auto cfg = small_config();
  const auto r = train(cfg);
  const auto rb = gan_bound_for_run(cfg, r.d, r.g, 1e4);
  EXPECT_TRUE(std::isfinite(rb.optimum.result.value));
  EXPECT_GT(rb.optimum.result.value, 0.0);
  EXPECT_NEAR(rb.L_d, discriminator_certificate(r.d) * std::sqrt(2.0), 1e-12);
}
