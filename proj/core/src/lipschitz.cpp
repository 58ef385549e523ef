#include "lipcert/lipschitz.hpp"

#include <cmath>
#include <limits>

#include "lipcert/errors.hpp"

namespace lipcert::lipschitz {

SpectralNormResult spectral_norm_from(const MatrixXd& w, VectorXd& v,
                                      const PowerIterationOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidParameter("power iteration tolerance must be positive");
  if (!w.allFinite()) throw InvalidParameter("spectral_norm: matrix has non-finite entries");
  SpectralNormResult result;
  if (w.size() == 0 || w.cwiseAbs().maxCoeff() == 0.0) return result;

  Rng rng(opts.seed);
  auto restart = [&] {
    v.resize(w.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    v.normalize();
  };
  if (v.size() != w.cols() || !(v.norm() > 0.0) || !v.allFinite()) {
    restart();
  } else {
    v.normalize();
  }

  double mu = 0.0;
  result.converged = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const VectorXd u = w * v;
    mu = u.squaredNorm();
    const VectorXd y = w.transpose() * u;
    const double residual = (y - mu * v).norm();
    result.iterations = it;
    if (mu > 0.0 && residual <= opts.tol * mu) {
      result.converged = true;
      break;
    }
    const double ny = y.norm();
    if (ny == 0.0) {
      // Start vector landed in the null space; restart from a fresh direction.
      restart();
      continue;
    }
    v = y / ny;
  }
  result.value = std::sqrt(mu);
  return result;
}

SpectralNormResult spectral_norm(const MatrixXd& w, const PowerIterationOptions& opts) {
  VectorXd v;
  return spectral_norm_from(w, v, opts);
}

double frobenius_norm(const MatrixXd& w) { return w.norm(); }

std::string to_string(Method m) {
  switch (m) {
    case Method::SpectralProduct:
      return "spectral";
    case Method::DropoutProduct:
      return "dropout";
    case Method::DeclaredCaps:
      return "declared";
  }
  return "spectral";
}

Method parse_method(const std::string& s) {
  if (s == "spectral" || s == "SpectralProduct") return Method::SpectralProduct;
  if (s == "dropout" || s == "DropoutProduct") return Method::DropoutProduct;
  if (s == "declared" || s == "DeclaredCaps") return Method::DeclaredCaps;
  throw InvalidParameter("unknown certification method '" + s + "'");
}

namespace {

void require_caps(const std::vector<double>& caps, std::size_t depth, const char* what) {
  if (caps.size() != depth) {
    throw InvalidParameter(std::string(what) + ": expected " + std::to_string(depth) +
                           " caps, got " + std::to_string(caps.size()));
  }
  for (double c : caps) {
    if (!(c > 0.0)) throw InvalidParameter(std::string(what) + ": caps must be positive");
  }
}

// Slack for comparing a measured norm against its cap.
constexpr double kCapSlack = 1e-9;

}  // namespace

LipschitzCertificate certify(const nn::Mlp& net, Method method, const CertifyOptions& opts) {
  LipschitzCertificate cert;
  cert.method = method;
  cert.bound = 1.0;
  const std::size_t depth = net.depth();

  switch (method) {
    case Method::SpectralProduct:
      for (std::size_t k = 0; k < depth; ++k) {
        const auto& l = net.layer(k);
        LayerFactor f;
        f.rho = l.activation.rho();
        f.norm = spectral_norm(l.weights, opts.power).value;
        f.factor = f.rho * f.norm;
        cert.per_layer.push_back(f);
      }
      break;

    case Method::DeclaredCaps:
      require_caps(opts.spectral_caps, depth, "declared caps");
      for (std::size_t k = 0; k < depth; ++k) {
        const auto& l = net.layer(k);
        const double actual = spectral_norm(l.weights, opts.power).value;
        const double cap = opts.spectral_caps[k];
        if (actual > cap * (1.0 + kCapSlack)) {
          throw CertificationRefused(k, "spectral norm " + std::to_string(actual) +
                                            " exceeds declared cap " + std::to_string(cap));
        }
        LayerFactor f;
        f.rho = l.activation.rho();
        f.norm = cap;
        f.factor = f.rho * cap;
        cert.per_layer.push_back(f);
      }
      break;

    case Method::DropoutProduct: {
      const double q = opts.keep_rate;
      if (!(q > 0.0 && q <= 1.0)) throw InvalidParameter("keep rate must lie in (0, 1]");
      require_caps(opts.frobenius_caps, depth, "dropout caps");
      for (std::size_t k = 0; k < depth; ++k) {
        const auto& l = net.layer(k);
        const double fro = frobenius_norm(l.weights);
        const double b = opts.frobenius_caps[k];
        if (fro > q * b * (1.0 + kCapSlack)) {
          throw CertificationRefused(k, "Frobenius norm " + std::to_string(fro) +
                                            " exceeds finalized cap q*b = " +
                                            std::to_string(q * b));
        }
        LayerFactor f;
        f.rho = l.activation.rho();
        f.norm = fro;
        f.factor = q * f.rho * b;
        cert.per_layer.push_back(f);
      }
      break;
    }
  }
  for (const auto& f : cert.per_layer) cert.bound *= f.factor;
  return cert;
}

MetricConversion to_linf_input(double l2_constant, Eigen::Index input_dim) {
  MetricConversion c;
  c.l2 = l2_constant;
  c.factor = std::sqrt(static_cast<double>(input_dim));
  c.linf = l2_constant * c.factor;
  c.note = "l2 constant " + std::to_string(l2_constant) + " x sqrt(" +
           std::to_string(input_dim) + ") for l-infinity inputs";
  return c;
}

MatrixXd project_spectral(const MatrixXd& w, double cap, const PowerIterationOptions& opts) {
  if (!(cap > 0.0)) throw InvalidParameter("spectral cap must be positive");
  const double sigma = spectral_norm(w, opts).value;
  if (sigma <= cap * (1.0 + opts.tol)) return w;
  return w * (cap / sigma);
}

MatrixXd project_frobenius(const MatrixXd& w, double cap) {
  if (!(cap > 0.0)) throw InvalidParameter("Frobenius cap must be positive");
  if (std::isinf(cap)) return w;
  const double fro = w.norm();
  if (fro <= cap) return w;
  return w * (cap / fro);
}

DropoutStepResult dropout_train_step(nn::Mlp& net, const MatrixXd& inputs,
                                     const LossGradient& loss_gradient, double keep_rate,
                                     double learning_rate, const std::vector<double>& caps,
                                     Rng& rng) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw InvalidParameter("keep rate must lie in (0, 1]");
  }
  if (caps.size() != net.depth()) throw InvalidParameter("one Frobenius cap per layer required");

  DropoutStepResult result;
  result.masks.resize(net.depth());
  // Hidden units only; the output layer is never thinned.
  for (std::size_t k = 0; k + 1 < net.depth(); ++k) {
    VectorXd mask(net.layer(k).out_dim());
    for (Eigen::Index j = 0; j < mask.size(); ++j) mask(j) = rng.bernoulli(keep_rate) ? 1.0 : 0.0;
    result.masks[k] = std::move(mask);
  }

  nn::ForwardCache cache;
  const MatrixXd out = nn::forward_batch(net, inputs, &cache, &result.masks);
  const MatrixXd upstream = loss_gradient(out);
  const nn::Gradients grads = nn::backward(net, cache, upstream, &result.masks);

  for (std::size_t k = 0; k < net.depth(); ++k) {
    auto& l = net.layer(k);
    l.weights -= learning_rate * grads.layers[k].weights;
    if (l.bias) *l.bias -= learning_rate * grads.layers[k].bias;
    l.weights = project_frobenius(l.weights, caps[k]);
  }
  return result;
}

void dropout_finalize(nn::Mlp& net, double keep_rate) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw InvalidParameter("keep rate must lie in (0, 1]");
  }
  for (auto& l : net.layers()) l.weights *= keep_rate;
}

VectorXd Box::sample(Rng& rng) const {
  VectorXd x(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) x(i) = rng.uniform(lower(i), upper(i));
  return x;
}

bool Box::contains(const VectorXd& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

Box Box::cube(Eigen::Index dim, double lo, double hi) {
  return Box{VectorXd::Constant(dim, lo), VectorXd::Constant(dim, hi)};
}

namespace {

double input_norm(const VectorXd& d, Metric metric) {
  return metric == Metric::L2 ? d.norm() : d.cwiseAbs().maxCoeff();
}

// Lower bound on the operator norm of J from the chosen input metric to l2.
double jacobian_operator_lower_bound(const MatrixXd& jac, Metric metric) {
  Eigen::JacobiSVD<MatrixXd> svd(jac, Eigen::ComputeThinV);
  if (metric == Metric::L2) return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  // l-inf ball vertices: sign patterns of the top right singular vector and of every row.
  double best = 0.0;
  if (svd.matrixV().cols() > 0) {
    const VectorXd s = svd.matrixV().col(0).unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
    best = (jac * s).norm();
  }
  for (Eigen::Index r = 0; r < jac.rows(); ++r) {
    const VectorXd s =
        jac.row(r).transpose().unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
    best = std::max(best, (jac * s).norm());
  }
  return best;
}

}  // namespace

double empirical_lipschitz_lower_bound(const nn::Mlp& net, const Box& domain, int n_pairs,
                                       Metric metric, Rng& rng) {
  if (n_pairs < 1) throw InvalidParameter("n_pairs must be at least 1");
  if (domain.dim() != net.input_dim()) throw DimensionMismatch("domain box dimension mismatch");
  const double local_radius = 1e-4 * std::max(domain.linf_diameter(), 1e-12);
  const Eigen::Index n = net.input_dim();

  MatrixXd xs(n, n_pairs);
  MatrixXd xps(n, n_pairs);
  for (int p = 0; p < n_pairs; ++p) {
    xs.col(p) = domain.sample(rng);
    if (p % 2 == 0) {
      xps.col(p) = domain.sample(rng);
    } else {
      VectorXd d(n);
      for (Eigen::Index i = 0; i < n; ++i) d(i) = rng.normal();
      const double norm = d.norm();
      xps.col(p) = xs.col(p) + (norm > 0 ? local_radius / norm : 0.0) * d;
    }
  }
  const MatrixXd hx = nn::forward_batch(net, xs);
  const MatrixXd hxp = nn::forward_batch(net, xps);

  double best = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const double denom = input_norm(xs.col(p) - xps.col(p), metric);
    if (denom == 0.0) continue;
    best = std::max(best, (hx.col(p) - hxp.col(p)).norm() / denom);
  }
  for (int p = 0; p < n_pairs; ++p) {
    const auto report = nn::input_jacobian(net, xs.col(p));
    best = std::max(best, jacobian_operator_lower_bound(report.jacobian, metric));
  }
  return best;
}

}  // namespace lipcert::lipschitz
