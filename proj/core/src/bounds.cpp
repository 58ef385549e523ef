#include "lipcert/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lipcert/errors.hpp"

namespace lipcert::bounds {

double log_in(LogBase base, double x) {
  switch (base) {
    case LogBase::Natural:
      return std::log(x);
    case LogBase::Two:
      return std::log2(x);
    case LogBase::Ten:
      return std::log10(x);
  }
  return std::log(x);
}

double BoundResult::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.value;
  }
  throw InvalidParameter("bound has no term named '" + name + "'");
}

double snapped_ceil(double x) {
  const double k = std::round(x);
  if (std::abs(x - k) <= 1e-12 * std::max(1.0, std::abs(x))) return k;
  return std::ceil(x);
}

namespace {

double snap(double x) {
  const double k = std::round(x);
  return std::abs(x - k) <= 1e-12 * std::max(1.0, std::abs(x)) ? k : x;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter(what);
}

void require_nonnegative(double v, const char* name) {
  require(v >= 0.0 && std::isfinite(v), std::string(name) + " must be finite and >= 0");
}

void require_probability(double v, const char* name) {
  require(v > 0.0 && v < 1.0, std::string(name) + " must lie in (0, 1)");
}

BoundResult finish(std::vector<Term> terms, double confidence) {
  BoundResult r;
  r.terms = std::move(terms);
  r.confidence = confidence;
  r.value = 0.0;
  for (const auto& t : r.terms) r.value += t.value;
  return r;
}

// C / sqrt(m) * sqrt(N log 4 - 2 log delta)
double concentration(double C, double cells, double delta, double m, LogBase base) {
  return C * std::sqrt((cells * log_in(base, 4.0) - 2.0 * log_in(base, delta)) / m);
}

}  // namespace

double cell_count(double diameter, int dim, double lambda) {
  require(diameter > 0.0, "diameter must be positive");
  require(dim >= 1, "dimension must be at least 1");
  require(lambda > 0.0, "lambda must be positive");
  const double ratio = snap(diameter / lambda);
  return snapped_ceil(std::pow(ratio, dim));
}

BoundResult thm1_part1(const Thm1Params& p) {
  require_nonnegative(p.L, "L");
  require_nonnegative(p.C, "C");
  require(p.B > 0.0, "B must be positive");
  require(p.n >= 1, "n must be at least 1");
  require(p.m >= 1.0, "m must be at least 1");
  require_probability(p.delta, "delta");
  require(p.lambda > 0.0 && p.lambda <= p.B, "lambda must lie in (0, B]");
  const double cells = cell_count(p.B, p.n, p.lambda);
  return finish({{"lipschitz", p.L * p.lambda},
                 {"concentration", concentration(p.C, cells, p.delta, p.m, p.log_base)}},
                1.0 - p.delta);
}

BoundResult thm1_part2(const Thm1Params& p) {
  require_nonnegative(p.L, "L");
  require_nonnegative(p.C, "C");
  require(p.B > 0.0, "B must be positive");
  require(p.n >= 1, "n must be at least 1");
  require(p.m >= 1.0, "m must be at least 1");
  const double alpha_max = static_cast<double>(p.n) / (p.n + 2.0);
  require(p.alpha > 0.0 && p.alpha <= alpha_max,
          "alpha must lie in (0, n/(n+2)] = (0, " + std::to_string(alpha_max) + "]");
  const double rate = std::pow(p.m, -p.alpha / p.n);
  const double confidence = 1.0 - 2.0 * std::exp(-0.5 * std::pow(p.m, p.alpha));
  require(confidence > 0.0, "m is too small for a non-vacuous confidence level");
  return finish({{"lipschitz", p.L * p.B * rate}, {"concentration", 2.0 * p.C * rate}},
                confidence);
}

int min_depth(double rate, double m) {
  require(rate > 0.0 && rate < 1.0, "rate must lie in (0, 1)");
  require(m >= 2.0, "m must be at least 2");
  return static_cast<int>(snapped_ceil(-0.5 * std::log(m) / std::log(rate)));
}

double nu_limit(double delta, double m) {
  if (m < 16.0) return 0.0;
  return delta * std::log(m) / std::log(std::log(m));
}

namespace {

void validate_fast(const FastRateParams& p) {
  require_nonnegative(p.C_family, "C_family");
  require_nonnegative(p.L_f, "L_f");
  require_nonnegative(p.C, "C");
  require(p.B > 0.0, "B must be positive");
  require(p.n >= 1, "n must be at least 1");
  require(p.m >= 3.0, "m must be at least 3");
  require_probability(p.delta, "delta");
  require(p.nu >= 0.0, "nu must be non-negative");
  require(p.nu == 0.0 || p.nu < nu_limit(p.delta, p.m),
          "nu must lie in [0, delta ln m / ln ln m) = [0, " +
              std::to_string(nu_limit(p.delta, p.m)) + ")");
  require(p.rate > 0.0 && p.rate < 1.0, "rate must lie in (0, 1)");
  const int required = min_depth(p.rate, p.m);
  if (p.K < required) throw DepthTooShallow(p.K, required);
  if (p.family == FastFamily::SpectralNorm && p.sn_layer_product) {
    const double lhs = p.C_family * std::pow(p.rate, p.K);
    require(lhs >= *p.sn_layer_product * (1.0 - 1e-12),
            "C_sn * p^K = " + std::to_string(lhs) + " is below prod rho_k s_k = " +
                std::to_string(*p.sn_layer_product));
  }
}

// C sqrt(ceil((log m)^nu) log 4 - log delta^2)
double fast_concentration(double C, double m, double nu, double delta, LogBase base) {
  const double cells = snapped_ceil(std::pow(log_in(base, m), nu));
  return C * std::sqrt(cells * log_in(base, 4.0) - log_in(base, delta * delta));
}

}  // namespace

BoundResult thm4_bound(const FastRateParams& p) {
  validate_fast(p);
  const double root_m = std::sqrt(p.m);
  const double logm = log_in(p.log_base, p.m);
  const double lip = p.C_family * p.L_f * p.B * std::pow(logm, -p.nu / p.n) / root_m;
  const double conc = fast_concentration(p.C, p.m, p.nu, p.delta, p.log_base) / root_m;
  return finish({{"lipschitz", lip}, {"concentration", conc}}, 1.0 - p.delta);
}

namespace {

BoundResult add_optimization_error(double eps_o, const BoundResult& inner) {
  require_nonnegative(eps_o, "eps_o");
  std::vector<Term> terms{{"optimization", eps_o}};
  for (const auto& t : inner.terms) terms.push_back({"2x_" + t.name, 2.0 * t.value});
  return finish(std::move(terms), inner.confidence);
}

}  // namespace

BoundResult consistency_bound(ConsistencyKind kind, double eps_o, const Thm1Params* general,
                              const FastRateParams* fast) {
  switch (kind) {
    case ConsistencyKind::General:
      require(general != nullptr, "general consistency needs Lipschitz-bound parameters");
      return add_optimization_error(eps_o, thm1_part2(*general));
    case ConsistencyKind::Dropout:
      require(fast != nullptr, "dropout consistency needs fast-rate parameters");
      return add_optimization_error(eps_o, thm4_bound(*fast));
  }
  throw InvalidParameter("unknown consistency kind");
}

namespace {

void validate_gan(const GanBoundParams& p) {
  require_nonnegative(p.L_psi, "L_psi");
  require_nonnegative(p.L_d, "L_d");
  require_nonnegative(p.L_g, "L_g");
  require_nonnegative(p.C, "C");
  require(p.B_x > 0.0 && p.B_z > 0.0, "B_x and B_z must be positive");
  require(p.n >= 1 && p.n_x >= 1, "dimensions must be at least 1");
  require(p.m >= 1.0, "m must be at least 1");
  require_probability(p.delta, "delta");
}

}  // namespace

BoundResult gan_bound(GanKind kind, const GanBoundParams& p, const FastRateParams* fast) {
  validate_gan(p);
  if (kind == GanKind::General) {
    require_probability(p.delta_x, "delta_x");
    require(p.lambda > 0.0 && p.lambda <= p.B_z, "lambda must lie in (0, B_z]");
    require(p.lambda_x > 0.0 && p.lambda_x <= p.B_x, "lambda_x must lie in (0, B_x]");
    const double confidence = 1.0 - p.delta - p.delta_x;
    require(confidence > 0.0, "delta + delta_x must be below 1");
    const double cells_z = cell_count(p.B_z, p.n, p.lambda);
    const double cells_x = cell_count(p.B_x, p.n_x, p.lambda_x);
    return finish(
        {{"noise_lipschitz", p.L() * p.lambda},
         {"noise_concentration", concentration(p.C, cells_z, p.delta, p.m, p.log_base)},
         {"data_lipschitz", p.L_psi * p.L_d * p.lambda_x},
         {"data_concentration", concentration(p.C, cells_x, p.delta_x, p.m, p.log_base)}},
        confidence);
  }

  require(fast != nullptr, "SN and dropout GAN bounds need fast-rate parameters");
  FastRateParams f = *fast;
  f.family = kind == GanKind::SpectralNorm ? FastFamily::SpectralNorm : FastFamily::Dropout;
  f.m = p.m;
  f.delta = p.delta;
  f.C = p.C;
  f.n = std::min(p.n, p.n_x);
  f.B = std::max(p.B_x, p.B_z);
  validate_fast(f);
  const double confidence = 1.0 - 2.0 * p.delta;
  require(confidence > 0.0, "2 delta must be below 1");
  const double root_m = std::sqrt(p.m);
  const double logm = log_in(p.log_base, p.m);
  const double noise =
      f.C_family * p.L_psi * p.L_g * p.B_z * std::pow(logm, -f.nu / p.n) / root_m;
  const double data = f.C_family * p.L_psi * p.B_x * std::pow(logm, -f.nu / p.n_x) / root_m;
  const double conc = 2.0 * fast_concentration(p.C, p.m, f.nu, p.delta, p.log_base) / root_m;
  return finish({{"noise_lipschitz", noise}, {"data_lipschitz", data}, {"concentration", conc}},
                confidence);
}

BoundResult gan_joint_error_bound(const GanBoundParams& p) { return gan_bound(GanKind::General, p); }

BoundResult gan_consistency_bound(GanKind kind, const GanBoundParams& p,
                                  const FastRateParams* fast) {
  return add_optimization_error(p.eps_o, gan_bound(kind, p, fast));
}

LambdaOptimum optimize_lambda(const std::function<BoundResult(double)>& evaluator,
                              const LambdaSearch& search) {
  require(search.lower > 0.0 && search.upper >= search.lower, "search box must lie in (0, B]");
  require(search.grid_points >= 2, "grid needs at least two points");

  LambdaOptimum best;
  best.result.value = std::numeric_limits<double>::infinity();
  auto consider = [&](double lambda) {
    BoundResult r = evaluator(lambda);
    if (r.value < best.result.value) {
      best.lambda = lambda;
      best.result = std::move(r);
    }
    return best.result.value;
  };

  const double log_lo = std::log(search.lower);
  const double log_hi = std::log(search.upper);
  const int n = search.grid_points;
  std::vector<double> grid(n);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) {
    grid[i] = i + 1 == n ? search.upper : std::exp(log_lo + (log_hi - log_lo) * i / (n - 1));
    values[i] = evaluator(grid[i]).value;
  }
  const int arg = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  consider(grid[arg]);
  if (search.canonical && *search.canonical >= search.lower && *search.canonical <= search.upper) {
    consider(*search.canonical);
  }

  // Golden-section search in log(lambda) over the neighbouring grid cells.
  double a = std::log(grid[std::max(arg - 1, 0)]);
  double b = std::log(grid[std::min(arg + 1, n - 1)]);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = evaluator(std::exp(c)).value;
  double fd = evaluator(std::exp(d)).value;
  for (int it = 0; it < search.refine_iterations && b - a > 1e-14; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = evaluator(std::exp(c)).value;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = evaluator(std::exp(d)).value;
    }
  }
  consider(std::clamp(std::exp(c), search.lower, search.upper));
  consider(std::clamp(std::exp(d), search.lower, search.upper));
  return best;
}

LambdaOptimum optimize_lambda_thm1(const Thm1Params& p, int grid_points) {
  LambdaSearch search;
  search.lower = p.B * 1e-6;
  search.upper = p.B;
  search.grid_points = grid_points;
  search.canonical = std::clamp(p.B * std::pow(p.m, -p.alpha / p.n), search.lower, search.upper);
  return optimize_lambda(
      [&p](double lambda) {
        Thm1Params q = p;
        q.lambda = lambda;
        return thm1_part1(q);
      },
      search);
}

GanLambdaOptimum optimize_gan_lambdas(const GanBoundParams& p, int grid_points) {
  auto side = [&](bool noise_side) {
    const double B = noise_side ? p.B_z : p.B_x;
    const int dim = noise_side ? p.n : p.n_x;
    LambdaSearch search;
    search.lower = B * 1e-6;
    search.upper = B;
    search.grid_points = grid_points;
    search.canonical = B * std::pow(p.m, -1.0 / (dim + 2.0));
    return optimize_lambda(
        [&](double lambda) {
          GanBoundParams q = p;
          q.lambda = noise_side ? lambda : p.B_z;
          q.lambda_x = noise_side ? p.B_x : lambda;
          const BoundResult full = gan_bound(GanKind::General, q);
          BoundResult half;
          half.confidence = full.confidence;
          for (const auto& t : full.terms) {
            if (t.name.rfind(noise_side ? "noise_" : "data_", 0) == 0) {
              half.terms.push_back(t);
              half.value += t.value;
            }
          }
          return half;
        },
        search);
  };
  GanLambdaOptimum out;
  out.lambda = side(true).lambda;
  out.lambda_x = side(false).lambda;
  GanBoundParams q = p;
  q.lambda = out.lambda;
  q.lambda_x = out.lambda_x;
  out.result = gan_bound(GanKind::General, q);
  return out;
}

bool maxmin_inequality_check(std::span<const double> f1, std::span<const double> f2) {
  if (f1.empty() || f2.empty()) throw InvalidParameter("maxmin check needs nonempty samples");
  if (f1.size() != f2.size()) throw DimensionMismatch("maxmin check needs equal-length samples");
  double max1 = f1[0], max2 = f2[0], min1 = f1[0], min2 = f2[0], sup_diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    max1 = std::max(max1, f1[i]);
    max2 = std::max(max2, f2[i]);
    min1 = std::min(min1, f1[i]);
    min2 = std::min(min2, f2[i]);
    sup_diff = std::max(sup_diff, std::abs(f1[i] - f2[i]));
    scale = std::max({scale, std::abs(f1[i]), std::abs(f2[i])});
  }
  // Rounding slack of a few ulps relative to the magnitudes involved.
  const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
  return std::abs(max1 - max2) <= sup_diff + slack && std::abs(min1 - min2) <= sup_diff + slack;
}

}  // namespace lipcert::bounds
