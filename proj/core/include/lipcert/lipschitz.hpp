#pragma once

// Norm machinery and Lipschitz certificates for dense networks, plus the two
// constructive normalization procedures: spectral projection, and dropout
// training with Frobenius projection followed by keep-rate scaling.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "lipcert/nn.hpp"
#include "lipcert/rng.hpp"

namespace lipcert::lipschitz {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PowerIterationOptions {
  double tol = 1e-9;
  int max_iter = 1000;
  std::uint64_t seed = 0x5eed;
};

struct SpectralNormResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Largest singular value by power iteration on W^T W. Stops once the
/// Rayleigh-quotient residual ||W^T W v - mu v|| falls below tol * mu, which
/// bounds the relative error of mu.
SpectralNormResult spectral_norm(const MatrixXd& w, const PowerIterationOptions& opts = {});

/// Same iteration started from v (random when v is empty or mismatched); v is
/// left at the final right singular vector estimate for warm restarts.
SpectralNormResult spectral_norm_from(const MatrixXd& w, VectorXd& v,
                                      const PowerIterationOptions& opts = {});

double frobenius_norm(const MatrixXd& w);

enum class Method { SpectralProduct, DropoutProduct, DeclaredCaps };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct LayerFactor {
  double rho = 1.0;
  double norm = 0.0;    // measured spectral norm, finalized Frobenius norm, or the declared cap
  double factor = 0.0;  // the layer's multiplicative contribution
};

struct LipschitzCertificate {
  double bound = 0.0;
  std::vector<LayerFactor> per_layer;
  Method method = Method::SpectralProduct;
};

struct CertifyOptions {
  std::vector<double> spectral_caps;    // s_k, DeclaredCaps
  std::vector<double> frobenius_caps;   // b_k, DropoutProduct
  double keep_rate = 0.5;               // q, DropoutProduct
  PowerIterationOptions power;
};

/// l2 -> l2 Lipschitz certificate. Biases never enter. Throws
/// CertificationRefused when a declared cap is violated.
LipschitzCertificate certify(const nn::Mlp& net, Method method, const CertifyOptions& opts = {});

/// An l2 constant re-expressed for l-infinity inputs: ||x||_2 <= sqrt(n) ||x||_inf.
struct MetricConversion {
  double l2 = 0.0;
  double linf = 0.0;
  double factor = 1.0;
  std::string note;
};

MetricConversion to_linf_input(double l2_constant, Eigen::Index input_dim);

/// W * min(1, cap / ||W||_sigma). Matrices already within cap * (1 + tol)
/// are returned unchanged, which makes the projection idempotent.
MatrixXd project_spectral(const MatrixXd& w, double cap, const PowerIterationOptions& opts = {});

/// Rescale W so that ||W||_F <= cap.
MatrixXd project_frobenius(const MatrixXd& w, double cap);

/// Maps a batch of network outputs (one column per sample) to dLoss/dOutput.
using LossGradient = std::function<MatrixXd(const MatrixXd& outputs)>;

struct DropoutStepResult {
  nn::UnitMasks masks;  // the thinned sub-network used by this step
};

/// One dropout minibatch step. Every hidden unit is kept with probability
/// keep_rate (one mask per minibatch), gradients flow through the thinned
/// network, a plain gradient step is applied, and each W_i is rescaled to
/// ||W_i||_F <= caps[i]. Infinite caps disable the projection.
DropoutStepResult dropout_train_step(nn::Mlp& net, const MatrixXd& inputs,
                                     const LossGradient& loss_gradient, double keep_rate,
                                     double learning_rate, const std::vector<double>& caps,
                                     Rng& rng);

/// Scales every weight matrix by the keep rate.
void dropout_finalize(nn::Mlp& net, double keep_rate);

enum class Metric { L2, Linf };

struct Box {
  VectorXd lower;
  VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  double linf_diameter() const { return (upper - lower).maxCoeff(); }
  VectorXd sample(Rng& rng) const;
  bool contains(const VectorXd& x) const;
  static Box cube(Eigen::Index dim, double lo, double hi);
};

/// Sampling witness: the larger of max ||h(x) - h(x')||_2 / ||x - x'||_metric
/// over random pairs (half global, half local) and the largest input-Jacobian
/// operator norm seen at the sampled points.
double empirical_lipschitz_lower_bound(const nn::Mlp& net, const Box& domain, int n_pairs,
                                       Metric metric, Rng& rng);

}  // namespace lipcert::lipschitz
