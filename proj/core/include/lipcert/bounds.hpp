#pragma once

// Closed-form evaluators for the Lipschitz-based generalization and
// consistency bounds, including the GAN variants, together with lambda
// optimization and the minimum-depth rule.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lipcert::bounds {

/// Base of every "log" inside the bound formulas. Natural log by default.
enum class LogBase { Natural, Two, Ten };

double log_in(LogBase base, double x);

struct Term {
  std::string name;
  double value = 0.0;
};

struct BoundResult {
  double value = 0.0;
  double confidence = 0.0;
  std::vector<Term> terms;

  double term(const std::string& name) const;
};

/// ceil((B / lambda)^n) as a real number. Ratios within a relative 1e-12 of an
/// integer snap to it first, so decimal inputs such as lambda = 0.1 do not
/// pick up a spurious extra cell from rounding.
double cell_count(double diameter, int dim, double lambda);

/// Smallest integer not below x, treating values within 1e-12 relative of an
/// integer as that integer.
double snapped_ceil(double x);

struct Thm1Params {
  double L = 0.0;       // l-infinity Lipschitz constant of the loss
  double C = 0.0;       // loss cap
  double B = 1.0;       // l-infinity domain diameter
  int n = 1;            // ambient dimension
  double m = 1.0;       // sample count
  double delta = 0.05;  // confidence parameter
  double lambda = 1.0;  // cell edge
  double alpha = 0.5;   // rate exponent (part 2 only)
  LogBase log_base = LogBase::Natural;
};

BoundResult thm1_part1(const Thm1Params& p);
BoundResult thm1_part2(const Thm1Params& p);

/// ceil(-0.5 * log_rate(m)).
int min_depth(double rate, double m);

enum class FastFamily { SpectralNorm, Dropout };

struct FastRateParams {
  FastFamily family = FastFamily::Dropout;
  double C_family = 1.0;  // C_sn or C_dr
  double L_f = 1.0;       // Lipschitz constant of the loss w.r.t. the network output
  double B = 1.0;
  double C = 1.0;
  int n = 1;
  double m = 1.0;
  double delta = 0.05;
  double nu = 0.0;
  int K = 1;
  double rate = 0.5;  // p (SN) or q (dropout)
  /// prod_k rho_k s_k; when set (SN family) C_sn * p^K >= it is verified.
  std::optional<double> sn_layer_product;
  LogBase log_base = LogBase::Natural;
};

/// Upper end of the admissible nu interval, delta * ln m / ln ln m; zero when
/// m < 16.
double nu_limit(double delta, double m);

BoundResult thm4_bound(const FastRateParams& p);

enum class ConsistencyKind { General, Dropout };

BoundResult consistency_bound(ConsistencyKind kind, double eps_o, const Thm1Params* general,
                              const FastRateParams* fast);

struct GanBoundParams {
  double L_psi = 1.0;
  double L_d = 1.0;
  double L_g = 1.0;
  double C = 1.0;
  double B_x = 1.0;
  double B_z = 1.0;
  int n_x = 1;
  int n = 1;
  double m = 1.0;
  double delta = 0.05;
  double delta_x = 0.05;
  double lambda = 1.0;
  double lambda_x = 1.0;
  double eps_o = 0.0;
  LogBase log_base = LogBase::Natural;

  double L() const { return L_psi * L_d * L_g; }
};

enum class GanKind { General, SpectralNorm, Dropout };

BoundResult gan_bound(GanKind kind, const GanBoundParams& p, const FastRateParams* fast = nullptr);
BoundResult gan_joint_error_bound(const GanBoundParams& p);
BoundResult gan_consistency_bound(GanKind kind, const GanBoundParams& p,
                                  const FastRateParams* fast = nullptr);

struct LambdaSearch {
  double lower = 0.0;
  double upper = 1.0;
  int grid_points = 1024;
  int refine_iterations = 80;
  /// Evaluated too; the returned bound is never worse than at this point.
  std::optional<double> canonical;
};

struct LambdaOptimum {
  double lambda = 0.0;
  BoundResult result;
};

/// Log-grid scan followed by golden-section refinement around the best grid
/// point.
LambdaOptimum optimize_lambda(const std::function<BoundResult(double)>& evaluator,
                              const LambdaSearch& search);

/// Convenience for part 1 of the Lipschitz bound over (0, B]; the canonical
/// point is B * m^(-alpha / n).
LambdaOptimum optimize_lambda_thm1(const Thm1Params& p, int grid_points = 1024);

struct GanLambdaOptimum {
  double lambda = 0.0;
  double lambda_x = 0.0;
  BoundResult result;
};

/// The noise-side and data-side terms separate, so each scale is optimized on
/// its own half of the general bound.
GanLambdaOptimum optimize_gan_lambdas(const GanBoundParams& p, int grid_points = 1024);

/// |max f1 - max f2| <= max|f1 - f2| and the same for min.
bool maxmin_inequality_check(std::span<const double> f1, std::span<const double> f2);

}  // namespace lipcert::bounds
