#pragma once

// Cube partitions of a compact box, empirical robustness and generalization
// gaps, a bound-violation harness, and a greedy covering-number estimator.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "lipcert/bounds.hpp"
#include "lipcert/lipschitz.hpp"
#include "lipcert/rng.hpp"

namespace lipcert::robustness {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lipschitz::Box;

/// ceil(B^n lambda^-n) as an exact integer; throws CellCountOverflow beyond
/// 2^63 - 1.
std::int64_t partition_count(double B, int n, double lambda);

/// Axis-aligned cubes of edge lambda anchored at the box's lower corner.
/// Cell k along an axis covers (lo + k lambda, lo + (k+1) lambda], the first
/// cell also owns lo itself, and the last cell absorbs the upper face.
class CubePartition {
 public:
  CubePartition(Box box, double edge);

  const Box& box() const { return box_; }
  double edge() const { return edge_; }
  std::int64_t n_cells() const { return n_cells_; }
  const std::vector<std::int64_t>& cells_per_axis() const { return per_axis_; }

  std::int64_t cell_index(const VectorXd& x) const;
  /// The cell intersected with the box.
  Box cell_box(std::int64_t index) const;

 private:
  Box box_;
  double edge_;
  std::vector<std::int64_t> per_axis_;
  std::int64_t n_cells_ = 1;
};

using LossFn = std::function<double(const VectorXd&)>;

struct RobustnessReport {
  double epsilon_hat = 0.0;  // a lower estimate of the per-cell supremum
  std::int64_t n_cells_occupied = 0;
  std::int64_t n_probes = 0;
};

/// Max over occupied cells of |loss(s) - loss(x)| for training points s and
/// probes x (uniform in the cell, plus the other training points there).
RobustnessReport empirical_epsilon(const LossFn& loss, const MatrixXd& train,
                                   const CubePartition& partition, int probes_per_cell, Rng& rng);

/// |mean loss on train - mean loss on test|; the test sample must be at least
/// ten times larger.
double empirical_gap(const LossFn& loss, const MatrixXd& train, const MatrixXd& test);

/// A synthetic supervised task: uniform inputs on a box and a loss with known
/// constants.
struct Task {
  Box domain;
  LossFn loss;
  double L_inf = 0.0;  // l-infinity Lipschitz constant of the loss
  double C = 0.0;      // loss cap
  int m = 100;
  int test_factor = 10;
};

/// Linear loss w^T x shifted into [0, C] over the box.
Task linear_task(const VectorXd& w, const Box& domain, int m);

struct TrialRow {
  int trial = 0;
  int m = 0;
  double lambda = 0.0;
  double gap = 0.0;
  double bound = 0.0;
  bool violated = false;
  double epsilon_hat = 0.0;
};

struct ViolationSummary {
  int violations = 0;
  int trials = 0;
  int epsilon_violations = 0;  // trials where epsilon_hat > L_inf * lambda
  std::vector<TrialRow> rows;

  double rate() const { return trials ? static_cast<double>(violations) / trials : 0.0; }
};

struct TrialOptions {
  double delta = 0.1;
  double lambda = 0.1;
  int probes_per_cell = 64;
  int threads = 1;
};

/// Draws n_trials independent m-samples and counts trials whose gap exceeds
/// part 1 of the Lipschitz bound. Trial t uses seed derive_seed(seed, "trial", t).
ViolationSummary violation_trial(const Task& task, const TrialOptions& opts, int n_trials,
                                 std::uint64_t seed);

/// Allowed violation rate delta + 3 sqrt(delta (1 - delta) / n).
double binomial_envelope(double delta, int n_trials);

/// Farthest-point cover size: an upper bound on the eta-covering number,
/// non-increasing in eta. Points are columns.
std::int64_t greedy_covering_number(const MatrixXd& points, double eta, lipschitz::Metric metric);

}  // namespace lipcert::robustness
