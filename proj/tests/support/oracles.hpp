#pragma once

// Independent reference computations used as test oracles. Nothing here
// shares code with the library beyond the data types.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "lipcert/nn.hpp"
#include "lipcert/rng.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(MatrixXd a, double tol = 1e-15, int max_sweeps = 100) {
  const int n = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * a.norm()) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

inline double spectral_norm(const MatrixXd& w) {
  const MatrixXd g = w.cols() <= w.rows() ? MatrixXd(w.transpose() * w) : MatrixXd(w * w.transpose());
  return std::sqrt(std::max(0.0, jacobi_eigenvalues(g).back()));
}

inline double activate(const lipcert::nn::Activation& a, double z) {
  using K = lipcert::nn::ActivationKind;
  switch (a.kind) {
    case K::Identity: return z;
    case K::ReLU: return z > 0 ? z : 0.0;
    case K::LeakyReLU: return z > 0 ? z : a.slope * z;
    case K::Tanh: return std::tanh(z);
    case K::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

/// Scalar-loop forward pass.
inline std::vector<double> straight_forward(const lipcert::nn::Mlp& net, std::vector<double> x) {
  for (const auto& l : net.layers()) {
    std::vector<double> y(static_cast<std::size_t>(l.out_dim()));
    for (Eigen::Index i = 0; i < l.out_dim(); ++i) {
      double acc = l.bias ? (*l.bias)(i) : 0.0;
      for (Eigen::Index j = 0; j < l.in_dim(); ++j) acc += l.weights(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = activate(l.activation, acc);
    }
    x = std::move(y);
  }
  return x;
}

/// Random network with mixed smooth or piecewise-linear activations.
inline lipcert::nn::Mlp random_mlp(lipcert::Rng& rng, int max_layers, int max_width, bool smooth_only,
                                   Eigen::Index input_dim = 0) {
  using lipcert::nn::Activation;
  const int depth = rng.uniform_int(1, max_layers);
  Eigen::Index in = input_dim > 0 ? input_dim : rng.uniform_int(1, max_width);
  const Eigen::Index n0 = in;
  std::vector<lipcert::nn::Layer> layers;
  for (int k = 0; k < depth; ++k) {
    const Eigen::Index out = rng.uniform_int(1, max_width);
    lipcert::nn::Layer l;
    l.weights = MatrixXd(out, in);
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = rng.uniform(-1.0, 1.0);
    if (rng.bernoulli(0.7)) {
      VectorXd b(out);
      for (Eigen::Index i = 0; i < out; ++i) b(i) = rng.uniform(-0.5, 0.5);
      l.bias = b;
    }
    const int pick = rng.uniform_int(0, smooth_only ? 2 : 4);
    switch (pick) {
      case 0: l.activation = Activation::tanh(); break;
      case 1: l.activation = Activation::sigmoid(); break;
      case 2: l.activation = Activation::identity(); break;
      case 3: l.activation = Activation::relu(); break;
      default: l.activation = Activation::leaky_relu(rng.uniform(0.01, 0.3)); break;
    }
    layers.push_back(std::move(l));
    in = out;
  }
  return lipcert::nn::Mlp(n0, std::move(layers));
}

/// Central-difference gradient of a scalar function of a vector.
inline VectorXd numeric_gradient(const std::function<double(const VectorXd&)>& f, VectorXd x,
                                 double h) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    x(i) = xi + h;
    const double up = f(x);
    x(i) = xi - h;
    const double down = f(x);
    x(i) = xi;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Minimum number of data-centred balls of radius eta covering all points,
/// by exhaustive branch and bound. Only for a handful of points.
inline int exact_covering_number(const MatrixXd& pts, double eta, bool linf) {
  const int n = static_cast<int>(pts.cols());
  std::vector<std::uint64_t> covers(n, 0);
  for (int c = 0; c < n; ++c)
    for (int p = 0; p < n; ++p) {
      const VectorXd d = pts.col(c) - pts.col(p);
      const double dist = linf ? d.cwiseAbs().maxCoeff() : d.norm();
      if (dist <= eta) covers[c] |= std::uint64_t{1} << p;
    }
  const std::uint64_t all = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  int best = n;
  std::function<void(std::uint64_t, int)> search = [&](std::uint64_t covered, int used) {
    if (used >= best) return;
    if (covered == all) {
      best = used;
      return;
    }
    int first = 0;
    while (covered >> first & 1) ++first;
    for (int c = 0; c < n; ++c) {
      if (covers[c] >> first & 1) search(covered | covers[c], used + 1);
    }
  };
  search(0, 0);
  return best;
}

}  // namespace oracle
