#include <gtest/gtest.h>

#include "lipcert/errors.hpp"
#include "lipcert/nn.hpp"
#include "oracles.hpp"

using namespace lipcert;
using namespace lipcert::nn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Mlp single(const MatrixXd& w, Activation act, std::optional<VectorXd> b = std::nullopt) {
  return Mlp(w.cols(), {Layer{w, b, act}});
}

}  // namespace

TEST(Forward, IdentityNetwork) {
  const auto net = single(MatrixXd::Identity(2, 2), Activation::identity());
  const VectorXd y = forward(net, Eigen::Vector2d(1, 2));
  EXPECT_EQ(y, Eigen::Vector2d(1, 2));
}

TEST(Forward, ReluClampsNegatives) {
  const auto net = single(MatrixXd::Identity(2, 2), Activation::relu());
  EXPECT_EQ(forward(net, Eigen::Vector2d(-3, 5)), Eigen::Vector2d(0, 5));
}

TEST(Forward, MatchesScalarReevaluation) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto net = oracle::random_mlp(rng, 3, 6, false);
    VectorXd x(net.input_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2, 2);
    const auto ref = oracle::straight_forward(net, std::vector<double>(x.data(), x.data() + x.size()));
    const VectorXd y = forward(net, x);
    for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y(i), ref[i], 1e-12);
  }
}

TEST(Forward, BatchMatchesColumns) {
  Rng rng(3);
  const auto net = oracle::random_mlp(rng, 3, 5, false, 4);
  MatrixXd xs = MatrixXd::Random(4, 9);
  const MatrixXd ys = forward_batch(net, xs);
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    EXPECT_LT((ys.col(j) - forward(net, xs.col(j))).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Forward, RejectsWrongWidth) {
  const auto net = single(MatrixXd::Identity(2, 2), Activation::identity());
  EXPECT_THROW(forward(net, VectorXd::Ones(3)), DimensionMismatch);
}

TEST(Mlp, RejectsBrokenChain) {
  std::vector<Layer> layers{Layer{MatrixXd::Ones(3, 2), std::nullopt, Activation::relu()},
                            Layer{MatrixXd::Ones(1, 4), std::nullopt, Activation::identity()}};
  EXPECT_THROW(Mlp(2, layers), DimensionMismatch);
}

TEST(Jacobian, LinearLayerIsWeights) {
  MatrixXd w(2, 3);
  w << 1, 2, 3, -4, 5, 6;
  const auto rep = input_jacobian(single(w, Activation::identity()), VectorXd::Ones(3));
  EXPECT_EQ(rep.jacobian, w);
  EXPECT_DOUBLE_EQ(rep.fro_norm, w.norm());
}

TEST(Jacobian, DeadReluIsZero) {
  const auto net = single(MatrixXd::Identity(2, 2), Activation::relu(), VectorXd::Constant(2, -5.0));
  const auto rep = input_jacobian(net, Eigen::Vector2d(1, 2));
  EXPECT_TRUE(rep.jacobian.isZero());
  EXPECT_EQ(rep.fro_norm, 0.0);
}

TEST(Jacobian, MatchesCentralDifferences) {
  Rng rng(11);
  for (int t = 0; t < 30; ++t) {
    const auto net = oracle::random_mlp(rng, 3, 6, true);
    VectorXd x(net.input_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
    const MatrixXd fd = finite_diff_jacobian(net, x, 1e-5);
    EXPECT_LT((input_jacobian(net, x).jacobian - fd).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Jacobian, FiniteDifferenceOfIdentityNet) {
  const auto net = single(MatrixXd::Identity(3, 3), Activation::identity());
  EXPECT_LT((finite_diff_jacobian(net, VectorXd::Ones(3), 1e-3) - MatrixXd::Identity(3, 3))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(5);
  const auto net = oracle::random_mlp(rng, 3, 4, false, 3);
  ForwardCache cache;
  const MatrixXd xs = MatrixXd::Random(3, 4);
  const MatrixXd ys = forward_batch(net, xs, &cache);
  const auto g = backward(net, cache, MatrixXd::Zero(ys.rows(), ys.cols()));
  for (const auto& l : g.layers) {
    EXPECT_TRUE(l.weights.isZero());
    if (l.bias.size()) {
      EXPECT_TRUE(l.bias.isZero());
    }
  }
  EXPECT_TRUE(g.input.isZero());
}

TEST(Backward, SquaredLossClosedForm) {
  MatrixXd w(2, 2);
  w << 1, 2, 3, 4;
  const auto net = single(w, Activation::identity());
  const VectorXd x = Eigen::Vector2d(0.5, -1.0);
  const VectorXd t = Eigen::Vector2d(1.0, 1.0);
  const VectorXd r = w * x - t;
  const auto g = param_gradients(net, x, 2.0 * r);
  EXPECT_LT((g[0].weights - 2.0 * r * x.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    const auto net = oracle::random_mlp(rng, 3, 5, true);
    const MatrixXd xs = MatrixXd::Random(net.input_dim(), 3);
    const MatrixXd up = MatrixXd::Random(net.output_dim(), 3);
    const auto grads = param_gradients(net, xs, up);
    for (std::size_t k = 0; k < net.depth(); ++k) {
      const MatrixXd& w = net.layer(k).weights;
      const auto loss_w = [&](const VectorXd& flat) {
        Mlp copy = net;
        copy.layer(k).weights = Eigen::Map<const MatrixXd>(flat.data(), w.rows(), w.cols());
        return (forward_batch(copy, xs).cwiseProduct(up)).sum() / xs.cols();
      };
      const VectorXd flat = Eigen::Map<const VectorXd>(w.data(), w.size());
      const VectorXd fd = oracle::numeric_gradient(loss_w, flat, 1e-5);
      const VectorXd an = Eigen::Map<const VectorXd>(grads[k].weights.data(), w.size());
      EXPECT_LT((fd - an).cwiseAbs().maxCoeff(), 1e-6);
      if (net.layer(k).bias) {
        const auto loss_b = [&](const VectorXd& b) {
          Mlp copy = net;
          copy.layer(k).bias = b;
          return (forward_batch(copy, xs).cwiseProduct(up)).sum() / xs.cols();
        };
        const VectorXd fdb = oracle::numeric_gradient(loss_b, *net.layer(k).bias, 1e-5);
        EXPECT_LT((fdb - grads[k].bias).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(Backward, InputGradientsAreJacobianTransposeProducts) {
  Rng rng(23);
  const auto net = oracle::random_mlp(rng, 3, 5, true, 3);
  const MatrixXd xs = MatrixXd::Random(3, 4);
  const MatrixXd up = MatrixXd::Random(net.output_dim(), 4);
  const MatrixXd gi = input_gradients(net, xs, up);
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    const VectorXd ref = input_jacobian(net, xs.col(j)).jacobian.transpose() * up.col(j);
    EXPECT_LT((gi.col(j) - ref).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Activation, RhoValues) {
  EXPECT_EQ(Activation::identity().rho(), 1.0);
  EXPECT_EQ(Activation::relu().rho(), 1.0);
  EXPECT_EQ(Activation::tanh().rho(), 1.0);
  EXPECT_EQ(Activation::sigmoid().rho(), 0.25);
  EXPECT_EQ(Activation::leaky_relu(0.2).rho(), 1.0);
  EXPECT_EQ(Activation::leaky_relu(1.5).rho(), 1.5);
}

TEST(Serialization, RoundTripIsExact) {
  Rng rng(29);
  for (int t = 0; t < 20; ++t) {
    const auto net = oracle::random_mlp(rng, 4, 6, false);
    const auto text = to_json(net).dump();
    const auto back = mlp_from_json(nlohmann::json::parse(text));
    EXPECT_TRUE(back == net);
    EXPECT_EQ(to_json(back).dump(), text);
  }
}

TEST(Init, SeededConstructionIsDeterministic) {
  InitSpec spec;
  spec.widths = {8, 8, 1};
  Rng a(42), b(42);
  EXPECT_TRUE(make_mlp(3, spec, a) == make_mlp(3, spec, b));
}
