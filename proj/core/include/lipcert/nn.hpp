#pragma once

// Dense feed-forward networks with exact forward, input-Jacobian and
// parameter-gradient computation. Batches are stored column-wise: a batch of
// B inputs of width n is an n x B matrix.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipcert/rng.hpp"

namespace lipcert::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ActivationKind { Identity, ReLU, LeakyReLU, Tanh, Sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  double slope = 0.0;  // LeakyReLU only

  static Activation identity() { return {ActivationKind::Identity, 0.0}; }
  static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
  static Activation leaky_relu(double slope) { return {ActivationKind::LeakyReLU, slope}; }
  static Activation tanh() { return {ActivationKind::Tanh, 0.0}; }
  static Activation sigmoid() { return {ActivationKind::Sigmoid, 0.0}; }

  /// Lipschitz constant of the scalar map.
  double rho() const;
  double apply(double z) const;
  /// Derivative at pre-activation z. The ReLU family uses 0 at the kink.
  double derivative(double z) const;

  std::string name() const;
  static Activation parse(const std::string& name, double slope = 0.0);

  bool operator==(const Activation&) const = default;
};

struct Layer {
  MatrixXd weights;               // out x in
  std::optional<VectorXd> bias;   // out, or absent
  Activation activation;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

class Mlp {
 public:
  Mlp() = default;
  /// Validates chaining of layer widths and finiteness of every weight.
  Mlp(Eigen::Index input_dim, std::vector<Layer> layers);

  Eigen::Index input_dim() const { return input_dim_; }
  Eigen::Index output_dim() const;
  std::size_t depth() const { return layers_.size(); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Layer& layer(std::size_t k) const { return layers_.at(k); }
  Layer& layer(std::size_t k) { return layers_.at(k); }

  /// Re-checks the invariants after in-place mutation.
  void validate() const;

  bool operator==(const Mlp&) const;

 private:
  Eigen::Index input_dim_ = 0;
  std::vector<Layer> layers_;
};

/// Per-layer multiplicative masks on layer outputs; an empty vector means
/// "no mask" for that layer.
using UnitMasks = std::vector<VectorXd>;

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<MatrixXd> inputs;  // inputs[k] is what layer k consumed
  std::vector<MatrixXd> pre;     // pre-activations of layer k
};

struct LayerGradient {
  MatrixXd weights;
  VectorXd bias;  // empty when the layer has no bias
};

struct Gradients {
  std::vector<LayerGradient> layers;  // batch-averaged
  MatrixXd input;                     // per-sample input gradients, not averaged
};

VectorXd forward(const Mlp& net, const VectorXd& x);
MatrixXd forward_batch(const Mlp& net, const MatrixXd& xs, ForwardCache* cache = nullptr,
                       const UnitMasks* masks = nullptr);

/// Reverse pass. `upstream` holds dLoss_i/dOutput_i per column; parameter
/// gradients are averaged over the batch, input gradients are per sample.
Gradients backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& upstream,
                   const UnitMasks* masks = nullptr);

std::vector<LayerGradient> param_gradients(const Mlp& net, const MatrixXd& xs,
                                           const MatrixXd& upstream);

/// Per-sample input gradients J_i^T g_i for a batch.
MatrixXd input_gradients(const Mlp& net, const MatrixXd& xs, const MatrixXd& upstream);

struct JacobianReport {
  MatrixXd jacobian;  // out x in
  double fro_norm = 0.0;
};

JacobianReport input_jacobian(const Mlp& net, const VectorXd& x);

/// Central differences; test oracle only.
MatrixXd finite_diff_jacobian(const Mlp& net, const VectorXd& x, double step);

struct InitSpec {
  std::vector<Eigen::Index> widths;  // output width of every layer
  Activation hidden = Activation::tanh();
  Activation output = Activation::identity();
  bool bias = true;
  double gain = 1.0;  // multiplies the Glorot-uniform range
};

Mlp make_mlp(Eigen::Index input_dim, const InitSpec& spec, Rng& rng);

/// Byte-stable JSON: {layers: [{w, b, act, slope?}], input_dim}.
nlohmann::ordered_json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& doc);

}  // namespace lipcert::nn
