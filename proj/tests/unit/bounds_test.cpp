#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "frozen.hpp"
#include "lipcert/bounds.hpp"
#include "lipcert/errors.hpp"

using namespace lipcert;
using namespace lipcert::bounds;

namespace {

Thm1Params part1_example() {
  Thm1Params p;
  p.L = 1;
  p.C = 1;
  p.B = 1;
  p.n = 1;
  p.m = 1e4;
  p.delta = 0.05;
  p.lambda = 0.1;
  return p;
}

Thm1Params part2_example() {
  Thm1Params p;
  p.L = 1;
  p.C = 1;
  p.B = 1;
  p.n = 2;
  p.m = 256;
  p.alpha = 0.5;
  return p;
}

FastRateParams fast_example() {
  FastRateParams p;
  p.family = FastFamily::Dropout;
  p.C_family = 1;
  p.L_f = 1;
  p.B = 1;
  p.C = 1;
  p.n = 2;
  p.m = 1e4;
  p.delta = 0.1;
  p.nu = 0.25;
  p.K = 7;
  p.rate = 0.5;
  return p;
}

GanBoundParams gan_example() {
  GanBoundParams p;
  p.L_psi = p.L_d = p.L_g = 1;
  p.C = 1;
  p.B_x = p.B_z = 1;
  p.n_x = p.n = 1;
  p.lambda = p.lambda_x = 0.1;
  p.delta = p.delta_x = 0.05;
  p.m = 1e4;
  return p;
}

}  // namespace

TEST(Part1, Example) {
  const auto r = thm1_part1(part1_example());
  EXPECT_NEAR(r.value, frozen::kLipschitzPart1Example, 1e-13);
  EXPECT_NEAR(r.value, 0.144559, 1e-6);
  EXPECT_DOUBLE_EQ(r.confidence, 0.95);
}

TEST(Part1, TrivialLoss) {
  auto p = part1_example();
  p.L = 0;
  p.C = 0;
  for (double m : {10.0, 1e3, 1e8}) {
    p.m = m;
    EXPECT_EQ(thm1_part1(p).value, 0.0);
  }
}

TEST(Part1, InvalidParameters) {
  auto p = part1_example();
  p.lambda = 2.0;
  EXPECT_THROW(thm1_part1(p), InvalidParameter);
  p = part1_example();
  p.delta = 1.0;
  EXPECT_THROW(thm1_part1(p), InvalidParameter);
}

TEST(Part1, DecreasesInSampleSize) {
  auto p = part1_example();
  double prev = thm1_part1(p).value;
  for (double m : {2e4, 5e4, 1e5, 1e6}) {
    p.m = m;
    const double v = thm1_part1(p).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Part1, LogBaseChangesConcentration) {
  auto p = part1_example();
  const double natural = thm1_part1(p).value;
  p.log_base = LogBase::Two;
  EXPECT_GT(thm1_part1(p).value, natural);
}

TEST(Part2, Example) {
  const auto r = thm1_part2(part2_example());
  EXPECT_NEAR(r.value, frozen::kRatePart2Example, 1e-14);
  EXPECT_NEAR(r.confidence, frozen::kRatePart2Confidence, 1e-14);
}

TEST(Part2, TrivialAndInvalid) {
  auto p = part2_example();
  p.L = p.C = 0;
  EXPECT_EQ(thm1_part2(p).value, 0.0);
  p = part2_example();
  p.alpha = 0.6;
  EXPECT_THROW(thm1_part2(p), InvalidParameter);
}

TEST(MinDepth, PaperValues) {
  EXPECT_EQ(min_depth(0.5, 1e6), 10);
  EXPECT_EQ(min_depth(0.1, 1e6), 3);
  EXPECT_EQ(min_depth(0.5, 2), 1);
  EXPECT_EQ(min_depth(0.5, 1e4), 7);
  EXPECT_THROW(min_depth(1.0, 10), InvalidParameter);
  EXPECT_THROW(min_depth(0.0, 10), InvalidParameter);
}

TEST(CellCount, SnapsDecimalEdges) {
  EXPECT_EQ(cell_count(1.0, 3, 0.1), 1000.0);
  EXPECT_EQ(cell_count(1.0, 2, 0.3), 12.0);
  EXPECT_EQ(snapped_ceil(3.0000000000001), 3.0);
  EXPECT_EQ(snapped_ceil(3.01), 4.0);
}

TEST(FastRate, Example) {
  const auto r = thm4_bound(fast_example());
  EXPECT_NEAR(r.value, frozen::kFastRateExample, 1e-13);
}

TEST(FastRate, DepthPrecondition) {
  auto p = fast_example();
  p.K = 6;
  try {
    thm4_bound(p);
    FAIL();
  } catch (const DepthTooShallow& e) {
    EXPECT_EQ(e.required(), 7);
  }
}

TEST(FastRate, NuZeroCollapse) {
  auto p = fast_example();
  p.nu = 0.0;
  const auto r = thm4_bound(p);
  const double expected = p.C_family * p.L_f * p.B / std::sqrt(p.m) +
                          p.C * std::sqrt(std::log(4.0) - std::log(p.delta * p.delta)) / std::sqrt(p.m);
  EXPECT_NEAR(r.value, expected, 1e-14);
}

TEST(FastRate, TrivialAndNuLimit) {
  auto p = fast_example();
  p.C_family = 0;
  p.C = 0;
  EXPECT_EQ(thm4_bound(p).value, 0.0);
  EXPECT_NEAR(nu_limit(0.1, 1e4), 0.1 * std::log(1e4) / std::log(std::log(1e4)), 1e-15);
  p = fast_example();
  p.nu = 1.0;
  EXPECT_THROW(thm4_bound(p), InvalidParameter);
}

TEST(FastRate, SpectralFamilyChecksLayerProduct) {
  auto p = fast_example();
  p.family = FastFamily::SpectralNorm;
  p.sn_layer_product = 0.001;
  EXPECT_NO_THROW(thm4_bound(p));
  p.sn_layer_product = 10.0;
  EXPECT_THROW(thm4_bound(p), InvalidParameter);
}

TEST(Consistency, GeneralExample) {
  const auto p = part2_example();
  EXPECT_NEAR(consistency_bound(ConsistencyKind::General, 0.05, &p, nullptr).value, 1.55, 1e-14);
  auto z = p;
  z.L = z.C = 0;
  EXPECT_EQ(consistency_bound(ConsistencyKind::General, 0.0, &z, nullptr).value, 0.0);
}

TEST(Consistency, DropoutExample) {
  const auto f = fast_example();
  EXPECT_NEAR(consistency_bound(ConsistencyKind::Dropout, 0.01, nullptr, &f).value,
              frozen::kDropoutConsistencyExample, 1e-13);
}

TEST(Gan, GeneralExampleIsTwoLipschitzBounds) {
  const auto r = gan_bound(GanKind::General, gan_example());
  EXPECT_NEAR(r.value, frozen::kGanGeneralExample, 1e-13);
  EXPECT_NEAR(r.value, 2 * thm1_part1(part1_example()).value, 1e-14);
}

TEST(Gan, TrivialConstants) {
  auto p = gan_example();
  p.L_psi = p.L_d = p.L_g = 0;
  p.C = 0;
  EXPECT_EQ(gan_bound(GanKind::General, p).value, 0.0);
}

TEST(Gan, ConsistencyExample) {
  auto p = gan_example();
  p.eps_o = 0.01;
  EXPECT_NEAR(gan_consistency_bound(GanKind::General, p).value, frozen::kGanConsistencyExample,
              1e-13);
}

TEST(Gan, JointErrorAtLeastGeneral) {
  const auto p = gan_example();
  EXPECT_GE(gan_joint_error_bound(p).value, gan_bound(GanKind::General, p).value - 1e-15);
}

TEST(Optimize, NeverWorseThanCanonical) {
  auto p = part1_example();
  for (double m : {1e2, 1e4, 1e6}) {
    p.m = m;
    const auto opt = optimize_lambda_thm1(p);
    auto q = p;
    q.lambda = p.B * std::pow(m, -0.5 / p.n);
    EXPECT_LE(opt.result.value, thm1_part1(q).value + 1e-15);
    q.lambda = opt.lambda;
    EXPECT_NEAR(thm1_part1(q).value, opt.result.value, 1e-15);
  }
}

TEST(Optimize, GanLambdasImproveFixedChoice) {
  const auto p = gan_example();
  const auto opt = optimize_gan_lambdas(p);
  EXPECT_LE(opt.result.value, gan_bound(GanKind::General, p).value + 1e-15);
  EXPECT_GT(opt.lambda, 0.0);
  EXPECT_LE(opt.lambda, p.B_z);
}

TEST(MaxMin, InequalityHoldsOnRandomVectors) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(7), b(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = u(eng);
      b[i] = u(eng);
    }
    EXPECT_TRUE(maxmin_inequality_check(a, b));
  }
}
