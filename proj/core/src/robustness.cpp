#include "lipcert/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lipcert/errors.hpp"
#include "lipcert/parallel.hpp"

namespace lipcert::robustness {

namespace {

double snap(double x) {
  const double k = std::round(x);
  return std::abs(x - k) <= 1e-12 * std::max(1.0, std::abs(x)) ? k : x;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw CellCountOverflow("cell count exceeds 2^63 - 1; coarsen lambda");
  }
  return out;
}

}  // namespace

std::int64_t partition_count(double B, int n, double lambda) {
  if (!(lambda > 0.0) || !(lambda <= B)) throw InvalidParameter("lambda must lie in (0, B]");
  if (n < 1) throw InvalidParameter("dimension must be at least 1");
  const double ratio = snap(B / lambda);
  if (ratio == std::round(ratio)) {
    const auto base = static_cast<std::int64_t>(ratio);
    std::int64_t count = 1;
    for (int i = 0; i < n; ++i) count = checked_mul(count, base);
    return count;
  }
  const long double power = std::pow(static_cast<long double>(ratio), n);
  if (!(power < 9.2233720368547758e18L)) {
    throw CellCountOverflow("cell count exceeds 2^63 - 1; coarsen lambda");
  }
  return static_cast<std::int64_t>(bounds::snapped_ceil(static_cast<double>(power)));
}

CubePartition::CubePartition(Box box, double edge) : box_(std::move(box)), edge_(edge) {
  if (!(edge_ > 0.0)) throw InvalidParameter("cube edge must be positive");
  if (box_.lower.size() != box_.upper.size() || box_.lower.size() == 0) {
    throw DimensionMismatch("box corners must share a positive dimension");
  }
  for (Eigen::Index i = 0; i < box_.dim(); ++i) {
    const double width = box_.upper(i) - box_.lower(i);
    if (!(width >= 0.0)) throw InvalidParameter("box upper corner below lower corner");
    const auto count =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(bounds::snapped_ceil(width / edge_)));
    per_axis_.push_back(count);
    n_cells_ = checked_mul(n_cells_, count);
  }
}

std::int64_t CubePartition::cell_index(const VectorXd& x) const {
  if (x.size() != box_.dim()) throw DimensionMismatch("point dimension does not match the box");
  std::int64_t index = 0;
  for (Eigen::Index i = 0; i < box_.dim(); ++i) {
    const double t = (x(i) - box_.lower(i)) / edge_;
    auto k = static_cast<std::int64_t>(bounds::snapped_ceil(t)) - 1;
    k = std::clamp<std::int64_t>(k, 0, per_axis_[i] - 1);
    index = index * per_axis_[i] + k;
  }
  return index;
}

Box CubePartition::cell_box(std::int64_t index) const {
  if (index < 0 || index >= n_cells_) throw InvalidParameter("cell index out of range");
  Box cell{VectorXd(box_.dim()), VectorXd(box_.dim())};
  for (Eigen::Index i = box_.dim(); i-- > 0;) {
    const std::int64_t k = index % per_axis_[i];
    index /= per_axis_[i];
    cell.lower(i) = box_.lower(i) + static_cast<double>(k) * edge_;
    cell.upper(i) = std::min(box_.upper(i), box_.lower(i) + static_cast<double>(k + 1) * edge_);
  }
  return cell;
}

RobustnessReport empirical_epsilon(const LossFn& loss, const MatrixXd& train,
                                   const CubePartition& partition, int probes_per_cell, Rng& rng) {
  if (train.cols() == 0) throw InvalidParameter("training sample must be nonempty");
  if (probes_per_cell < 0) throw InvalidParameter("probes_per_cell must be non-negative");

  std::map<std::int64_t, std::vector<double>> train_losses;
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    train_losses[partition.cell_index(train.col(j))].push_back(loss(train.col(j)));
  }

  RobustnessReport report;
  report.n_cells_occupied = static_cast<std::int64_t>(train_losses.size());
  for (const auto& [cell, values] : train_losses) {
    const auto [min_s, max_s] = std::minmax_element(values.begin(), values.end());
    double lo = *min_s;
    double hi = *max_s;
    const Box cell_box = partition.cell_box(cell);
    for (int p = 0; p < probes_per_cell; ++p) {
      const double v = loss(cell_box.sample(rng));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    report.n_probes += probes_per_cell;
    report.epsilon_hat = std::max({report.epsilon_hat, hi - *min_s, *max_s - lo});
  }
  return report;
}

double empirical_gap(const LossFn& loss, const MatrixXd& train, const MatrixXd& test) {
  if (train.cols() == 0 || test.cols() == 0) throw InvalidParameter("samples must be nonempty");
  if (test.cols() < 10 * train.cols()) {
    throw InvalidParameter("test sample must be at least ten times the training sample");
  }
  auto mean = [&loss](const MatrixXd& s) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) total += loss(s.col(j));
    return total / static_cast<double>(s.cols());
  };
  return std::abs(mean(train) - mean(test));
}

Task linear_task(const VectorXd& w, const Box& domain, int m) {
  if (w.size() != domain.dim()) throw DimensionMismatch("weight and domain dimensions differ");
  double low = 0.0;
  double span = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    low += std::min(w(i) * domain.lower(i), w(i) * domain.upper(i));
    span += std::abs(w(i)) * (domain.upper(i) - domain.lower(i));
  }
  Task task;
  task.domain = domain;
  task.loss = [w, low](const VectorXd& x) { return w.dot(x) - low; };
  task.L_inf = w.lpNorm<1>();
  task.C = span;
  task.m = m;
  return task;
}

namespace {

MatrixXd sample_box(const Box& box, int count, Rng& rng) {
  MatrixXd out(box.dim(), count);
  for (int j = 0; j < count; ++j) out.col(j) = box.sample(rng);
  return out;
}

TrialRow run_trial(const Task& task, const TrialOptions& opts, int trial, std::uint64_t seed) {
  Rng rng(seed, "trial", static_cast<std::uint64_t>(trial));
  const MatrixXd train = sample_box(task.domain, task.m, rng);
  const MatrixXd test = sample_box(task.domain, task.m * task.test_factor, rng);

  bounds::Thm1Params p;
  p.L = task.L_inf;
  p.C = task.C;
  p.B = task.domain.linf_diameter();
  p.n = static_cast<int>(task.domain.dim());
  p.m = task.m;
  p.delta = opts.delta;
  p.lambda = opts.lambda;

  TrialRow row;
  row.trial = trial;
  row.m = task.m;
  row.lambda = opts.lambda;
  row.gap = empirical_gap(task.loss, train, test);
  row.bound = bounds::thm1_part1(p).value;
  row.violated = row.gap > row.bound;
  const CubePartition partition(task.domain, opts.lambda);
  row.epsilon_hat =
      empirical_epsilon(task.loss, train, partition, opts.probes_per_cell, rng).epsilon_hat;
  return row;
}

}  // namespace

ViolationSummary violation_trial(const Task& task, const TrialOptions& opts, int n_trials,
                                 std::uint64_t seed) {
  if (n_trials < 1) throw InvalidParameter("n_trials must be at least 1");
  ViolationSummary summary;
  summary.rows.resize(n_trials);
  parallel_for(static_cast<std::size_t>(n_trials), opts.threads, [&](std::size_t t) {
    summary.rows[t] = run_trial(task, opts, static_cast<int>(t), seed);
  });
  summary.trials = n_trials;
  for (const auto& row : summary.rows) {
    summary.violations += row.violated ? 1 : 0;
    if (row.epsilon_hat > task.L_inf * opts.lambda * (1.0 + 1e-12)) ++summary.epsilon_violations;
  }
  return summary;
}

double binomial_envelope(double delta, int n_trials) {
  return delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n_trials);
}

std::int64_t greedy_covering_number(const MatrixXd& points, double eta, lipschitz::Metric metric) {
  if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
  const Eigen::Index n = points.cols();
  if (n == 0) return 0;
  auto dist = [&](Eigen::Index a, Eigen::Index b) {
    const VectorXd d = points.col(a) - points.col(b);
    return metric == lipschitz::Metric::L2 ? d.norm() : d.cwiseAbs().maxCoeff();
  };
  std::vector<double> nearest(n);
  for (Eigen::Index j = 0; j < n; ++j) nearest[j] = dist(0, j);
  std::int64_t centers = 1;
  while (true) {
    const auto far = std::max_element(nearest.begin(), nearest.end()) - nearest.begin();
    if (nearest[far] <= eta) break;
    ++centers;
    for (Eigen::Index j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(far, j));
  }
  return centers;
}

}  // namespace lipcert::robustness
