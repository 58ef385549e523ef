#include "lipcert/nn.hpp"

#include <cmath>

#include "lipcert/errors.hpp"

namespace lipcert::nn {

double Activation::rho() const {
  switch (kind) {
    case ActivationKind::Identity:
    case ActivationKind::ReLU:
    case ActivationKind::Tanh:
      return 1.0;
    case ActivationKind::LeakyReLU:
      return std::max(1.0, std::abs(slope));
    case ActivationKind::Sigmoid:
      return 0.25;
  }
  return 1.0;
}

double Activation::apply(double z) const {
  switch (kind) {
    case ActivationKind::Identity:
      return z;
    case ActivationKind::ReLU:
      return z > 0.0 ? z : 0.0;
    case ActivationKind::LeakyReLU:
      return z > 0.0 ? z : slope * z;
    case ActivationKind::Tanh:
      return std::tanh(z);
    case ActivationKind::Sigmoid:
      return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double Activation::derivative(double z) const {
  switch (kind) {
    case ActivationKind::Identity:
      return 1.0;
    case ActivationKind::ReLU:
      return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU:
      return z > 0.0 ? 1.0 : slope;
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::Identity:
      return "identity";
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::LeakyReLU:
      return "leaky_relu";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::Sigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation Activation::parse(const std::string& name, double slope) {
  if (name == "identity") return identity();
  if (name == "relu") return relu();
  if (name == "leaky_relu") return leaky_relu(slope);
  if (name == "tanh") return tanh();
  if (name == "sigmoid") return sigmoid();
  throw InvalidParameter("unknown activation '" + name + "'");
}

Mlp::Mlp(Eigen::Index input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  validate();
}

Eigen::Index Mlp::output_dim() const {
  return layers_.empty() ? input_dim_ : layers_.back().out_dim();
}

void Mlp::validate() const {
  if (input_dim_ <= 0) throw InvalidParameter("input_dim must be positive");
  Eigen::Index width = input_dim_;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& l = layers_[k];
    if (l.in_dim() != width) {
      throw DimensionMismatch("layer " + std::to_string(k) + " expects input width " +
                              std::to_string(l.in_dim()) + " but receives " +
                              std::to_string(width));
    }
    if (l.out_dim() <= 0) throw InvalidParameter("layer " + std::to_string(k) + " has no units");
    if (!l.weights.allFinite()) {
      throw InvalidParameter("layer " + std::to_string(k) + " has non-finite weights");
    }
    if (l.bias) {
      if (l.bias->size() != l.out_dim()) {
        throw DimensionMismatch("layer " + std::to_string(k) + " bias width mismatch");
      }
      if (!l.bias->allFinite()) {
        throw InvalidParameter("layer " + std::to_string(k) + " has non-finite bias");
      }
    }
    width = l.out_dim();
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (input_dim_ != other.input_dim_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& a = layers_[k];
    const Layer& b = other.layers_[k];
    if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
        a.weights.cols() != b.weights.cols() || a.weights != b.weights ||
        a.bias.has_value() != b.bias.has_value()) {
      return false;
    }
    if (a.bias && *a.bias != *b.bias) return false;
  }
  return true;
}

namespace {

void apply_activation(const Activation& act, const MatrixXd& pre, MatrixXd& out) {
  out.resize(pre.rows(), pre.cols());
  switch (act.kind) {
    case ActivationKind::Identity:
      out = pre;
      break;
    case ActivationKind::ReLU:
      out = pre.cwiseMax(0.0);
      break;
    case ActivationKind::LeakyReLU:
      out = pre.unaryExpr([s = act.slope](double z) { return z > 0.0 ? z : s * z; });
      break;
    case ActivationKind::Tanh:
      out = pre.array().tanh().matrix();
      break;
    case ActivationKind::Sigmoid:
      out = pre.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
      break;
  }
}

bool has_mask(const UnitMasks* masks, std::size_t k) {
  return masks != nullptr && k < masks->size() && (*masks)[k].size() > 0;
}

}  // namespace

MatrixXd forward_batch(const Mlp& net, const MatrixXd& xs, ForwardCache* cache,
                       const UnitMasks* masks) {
  if (xs.rows() != net.input_dim()) {
    throw DimensionMismatch("input has width " + std::to_string(xs.rows()) + ", network expects " +
                            std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->inputs.reserve(net.depth());
    cache->pre.reserve(net.depth());
  }
  MatrixXd h = xs;
  MatrixXd next;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const Layer& l = net.layer(k);
    MatrixXd pre = l.weights * h;
    if (l.bias) pre.colwise() += *l.bias;
    apply_activation(l.activation, pre, next);
    if (has_mask(masks, k)) next.array().colwise() *= (*masks)[k].array();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

VectorXd forward(const Mlp& net, const VectorXd& x) {
  MatrixXd out = forward_batch(net, MatrixXd(x));
  return out.col(0);
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& upstream,
                   const UnitMasks* masks) {
  if (cache.pre.size() != net.depth()) {
    throw InvalidParameter("forward cache does not match the network depth");
  }
  if (upstream.rows() != net.output_dim() ||
      (net.depth() > 0 && upstream.cols() != cache.pre.back().cols())) {
    throw DimensionMismatch("upstream gradient shape does not match the network output");
  }
  Gradients grads;
  grads.layers.resize(net.depth());
  const double inv_batch = upstream.cols() > 0 ? 1.0 / static_cast<double>(upstream.cols()) : 0.0;
  MatrixXd delta = upstream;
  for (std::size_t i = net.depth(); i-- > 0;) {
    const Layer& l = net.layer(i);
    if (has_mask(masks, i)) delta.array().colwise() *= (*masks)[i].array();
    const Activation act = l.activation;
    delta.array() *= cache.pre[i].unaryExpr([&act](double z) { return act.derivative(z); }).array();
    grads.layers[i].weights = (delta * cache.inputs[i].transpose()) * inv_batch;
    if (l.bias) grads.layers[i].bias = delta.rowwise().sum() * inv_batch;
    delta = l.weights.transpose() * delta;
  }
  grads.input = std::move(delta);
  return grads;
}

std::vector<LayerGradient> param_gradients(const Mlp& net, const MatrixXd& xs,
                                           const MatrixXd& upstream) {
  if (xs.cols() == 0) throw InvalidParameter("batch must be nonempty");
  ForwardCache cache;
  forward_batch(net, xs, &cache);
  return backward(net, cache, upstream).layers;
}

MatrixXd input_gradients(const Mlp& net, const MatrixXd& xs, const MatrixXd& upstream) {
  ForwardCache cache;
  forward_batch(net, xs, &cache);
  return backward(net, cache, upstream).input;
}

JacobianReport input_jacobian(const Mlp& net, const VectorXd& x) {
  const Eigen::Index out = net.output_dim();
  // One reverse sweep per output row, run as a single batch.
  MatrixXd xs = x.replicate(1, out);
  MatrixXd rows = input_gradients(net, xs, MatrixXd::Identity(out, out));
  JacobianReport report;
  report.jacobian = rows.transpose();
  report.fro_norm = report.jacobian.norm();
  return report;
}

MatrixXd finite_diff_jacobian(const Mlp& net, const VectorXd& x, double step) {
  if (!(step > 0.0)) throw InvalidParameter("finite-difference step must be positive");
  const Eigen::Index n = net.input_dim();
  MatrixXd jac(net.output_dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXd plus = x;
    VectorXd minus = x;
    plus(j) += step;
    minus(j) -= step;
    jac.col(j) = (forward(net, plus) - forward(net, minus)) / (2.0 * step);
  }
  return jac;
}

Mlp make_mlp(Eigen::Index input_dim, const InitSpec& spec, Rng& rng) {
  std::vector<Layer> layers;
  Eigen::Index in = input_dim;
  for (std::size_t k = 0; k < spec.widths.size(); ++k) {
    const Eigen::Index out = spec.widths[k];
    const double limit = spec.gain * std::sqrt(6.0 / static_cast<double>(in + out));
    Layer l;
    l.weights.resize(out, in);
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) l.weights(r, c) = rng.uniform(-limit, limit);
    }
    if (spec.bias) {
      VectorXd b(out);
      for (Eigen::Index r = 0; r < out; ++r) b(r) = rng.uniform(-0.1, 0.1);
      l.bias = std::move(b);
    }
    l.activation = (k + 1 == spec.widths.size()) ? spec.output : spec.hidden;
    layers.push_back(std::move(l));
    in = out;
  }
  return Mlp(input_dim, std::move(layers));
}

nlohmann::ordered_json to_json(const Mlp& net) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const Layer& l : net.layers()) {
    nlohmann::ordered_json layer;
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
      w.push_back(std::move(row));
    }
    layer["w"] = std::move(w);
    if (l.bias) {
      nlohmann::ordered_json b = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < l.bias->size(); ++r) b.push_back((*l.bias)(r));
      layer["b"] = std::move(b);
    } else {
      layer["b"] = nullptr;
    }
    layer["act"] = l.activation.name();
    if (l.activation.kind == ActivationKind::LeakyReLU) layer["slope"] = l.activation.slope;
    layers.push_back(std::move(layer));
  }
  doc["layers"] = std::move(layers);
  doc["input_dim"] = net.input_dim();
  return doc;
}

Mlp mlp_from_json(const nlohmann::json& doc) {
  try {
    const auto input_dim = doc.at("input_dim").get<Eigen::Index>();
    std::vector<Layer> layers;
    for (const auto& jl : doc.at("layers")) {
      const auto& w = jl.at("w");
      Layer l;
      const auto rows = static_cast<Eigen::Index>(w.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
      l.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(w.at(r).size()) != cols) {
          throw DimensionMismatch("ragged weight matrix");
        }
        for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w.at(r).at(c).get<double>();
      }
      if (jl.contains("b") && !jl.at("b").is_null()) {
        const auto& b = jl.at("b");
        VectorXd bias(static_cast<Eigen::Index>(b.size()));
        for (Eigen::Index r = 0; r < bias.size(); ++r) bias(r) = b.at(r).get<double>();
        l.bias = std::move(bias);
      }
      l.activation = Activation::parse(jl.at("act").get<std::string>(), jl.value("slope", 0.0));
      layers.push_back(std::move(l));
    }
    return Mlp(input_dim, std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace lipcert::nn
