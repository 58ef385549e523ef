#include "lipcert/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lipcert/errors.hpp"
#include "lipcert/parallel.hpp"

namespace lipcert::augment {

AugmentSpec AugmentSpec::noise(double sigma, int copies) {
  AugmentSpec s;
  s.kind = AugmentKind::GaussianNoise;
  s.sigma = sigma;
  s.copies = copies;
  s.validate();
  return s;
}

AugmentSpec AugmentSpec::translate(int shift, int copies) {
  AugmentSpec s;
  s.kind = AugmentKind::Translate;
  s.shift = shift;
  s.copies = copies;
  s.validate();
  return s;
}

double AugmentSpec::effective_variance() const {
  if (kind == AugmentKind::GaussianNoise) return sigma * sigma;
  return shift * (shift + 1) / 3.0;
}

std::string AugmentSpec::label() const {
  std::ostringstream os;
  if (kind == AugmentKind::GaussianNoise) {
    os << "noise(" << sigma << ")";
  } else {
    os << "translate(" << shift << ")";
  }
  return os.str();
}

void AugmentSpec::validate() const {
  if (copies < 1) throw InvalidParameter("copies must be at least 1");
  if (kind == AugmentKind::GaussianNoise && !(sigma >= 0.0)) {
    throw InvalidParameter("noise sigma must be non-negative");
  }
  if (kind == AugmentKind::Translate && shift < 0) {
    throw InvalidParameter("translation radius must be non-negative");
  }
}

Eigen::MatrixXi translation_shifts(int s, int count, Rng& rng) {
  if (s < 0) throw InvalidParameter("translation radius must be non-negative");
  Eigen::MatrixXi out(2, count);
  for (int j = 0; j < count; ++j) {
    out(0, j) = rng.uniform_int(-s, s);
    out(1, j) = rng.uniform_int(-s, s);
  }
  return out;
}

VectorXd shift_image(const VectorXd& image, GridShape grid, int dx, int dy) {
  if (image.size() != static_cast<Eigen::Index>(grid.rows) * grid.cols) {
    throw DimensionMismatch("image size does not match the grid");
  }
  VectorXd out = VectorXd::Zero(image.size());
  for (int r = 0; r < grid.rows; ++r) {
    const int src_r = r - dy;
    if (src_r < 0 || src_r >= grid.rows) continue;
    for (int c = 0; c < grid.cols; ++c) {
      const int src_c = c - dx;
      if (src_c < 0 || src_c >= grid.cols) continue;
      out(r * grid.cols + c) = image(src_r * grid.cols + src_c);
    }
  }
  return out;
}

MatrixXd sprite_dataset(int count, Rng& rng) {
  constexpr int kSide = 8;
  MatrixXd out = MatrixXd::Zero(kSide * kSide, count);
  for (int j = 0; j < count; ++j) {
    const int h = rng.uniform_int(2, 4);
    const int w = rng.uniform_int(2, 4);
    const int top = rng.uniform_int(2, kSide - 2 - h);
    const int left = rng.uniform_int(2, kSide - 2 - w);
    for (int r = top; r < top + h; ++r) {
      for (int c = left; c < left + w; ++c) out(r * kSide + c, j) = 1.0;
    }
  }
  return out;
}

AugmentResult augment(const MatrixXd& batch, const AugmentSpec& spec, Rng& rng,
                      std::optional<GridShape> grid) {
  spec.validate();
  const Eigen::Index n = batch.cols();
  const Eigen::Index total = n * spec.copies;
  AugmentResult out;
  out.batch.resize(batch.rows(), total);

  if (spec.kind == AugmentKind::GaussianNoise) {
    out.perturbations.resize(batch.rows(), total);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int r = 0; r < spec.copies; ++r) {
        const Eigen::Index col = j * spec.copies + r;
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
          out.perturbations(i, col) = spec.sigma * rng.normal();
        }
        out.batch.col(col) = batch.col(j) + out.perturbations.col(col);
      }
    }
    return out;
  }

  if (!grid || batch.rows() != static_cast<Eigen::Index>(grid->rows) * grid->cols) {
    throw InvalidParameter("translation needs grid-structured data with a matching GridShape");
  }
  out.perturbations.resize(2, total);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int r = 0; r < spec.copies; ++r) {
      const Eigen::Index col = j * spec.copies + r;
      const int dx = rng.uniform_int(-spec.shift, spec.shift);
      const int dy = rng.uniform_int(-spec.shift, spec.shift);
      out.perturbations(0, col) = dx;
      out.perturbations(1, col) = dy;
      out.batch.col(col) = shift_image(batch.col(j), *grid, dx, dy);
    }
  }
  return out;
}

AugmentResult augment(const MatrixXd& batch, const AugmentSpec& spec, std::uint64_t seed,
                      std::optional<GridShape> grid) {
  Rng rng(seed, "augment");
  return augment(batch, spec, rng, grid);
}

double hutchinson_fro_sq(const MatVec& matvec, int dim, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw InvalidParameter("n_samples must be at least 1");
  if (dim < 1) throw InvalidParameter("dim must be at least 1");
  Rng rng(seed, "hutchinson");
  VectorXd u(dim);
  double total = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < dim; ++i) u(i) = rng.normal();
    total += matvec(u).squaredNorm();
  }
  return total / n_samples;
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<VectorXd> means,
                                 std::vector<double> sigmas)
    : weights_(std::move(weights)), means_(std::move(means)), sigmas_(std::move(sigmas)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != sigmas_.size()) {
    throw InvalidParameter("mixture needs matching, nonempty weights, means and sigmas");
  }
  dim_ = static_cast<int>(means_.front().size());
  if (dim_ < 1 || dim_ > 2) throw InvalidParameter("mixtures are one- or two-dimensional");
  double total = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    if (means_[c].size() != dim_) throw DimensionMismatch("mixture means differ in dimension");
    if (!(weights_[c] > 0.0) || !(sigmas_[c] > 0.0)) {
      throw InvalidParameter("mixture weights and sigmas must be positive");
    }
    total += weights_[c];
  }
  for (auto& w : weights_) w /= total;
}

GaussianMixture GaussianMixture::standard_normal_1d() {
  return GaussianMixture({1.0}, {VectorXd::Zero(1)}, {1.0});
}

double GaussianMixture::value(const VectorXd& x) const {
  if (x.size() != dim_) throw DimensionMismatch("point dimension does not match the density");
  double total = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    const double s2 = sigmas_[c] * sigmas_[c];
    const double norm = std::pow(2.0 * std::numbers::pi * s2, -0.5 * dim_);
    total += weights_[c] * norm * std::exp(-(x - means_[c]).squaredNorm() / (2.0 * s2));
  }
  return total;
}

VectorXd GaussianMixture::gradient(const VectorXd& x) const {
  if (x.size() != dim_) throw DimensionMismatch("point dimension does not match the density");
  VectorXd g = VectorXd::Zero(dim_);
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    const double s2 = sigmas_[c] * sigmas_[c];
    const double norm = std::pow(2.0 * std::numbers::pi * s2, -0.5 * dim_);
    const VectorXd d = x - means_[c];
    g -= weights_[c] * norm * std::exp(-d.squaredNorm() / (2.0 * s2)) / s2 * d;
  }
  return g;
}

std::pair<double, double> GaussianMixture::support() const {
  if (dim_ != 1) throw InvalidParameter("support interval is defined for 1D densities only");
  double lo = means_[0](0);
  double hi = lo;
  for (std::size_t c = 0; c < means_.size(); ++c) {
    lo = std::min(lo, means_[c](0) - 8.0 * sigmas_[c]);
    hi = std::max(hi, means_[c](0) + 8.0 * sigmas_[c]);
  }
  return {lo, hi};
}

PlateauDensity::PlateauDensity(double half_width, double tail) : a_(half_width), s_(tail) {
  if (!(a_ > 0.0) || !(s_ > 0.0)) throw InvalidParameter("plateau widths must be positive");
  c_ = 1.0 / (2.0 * a_ + s_ * std::sqrt(2.0 * std::numbers::pi));
}

double PlateauDensity::value(const VectorXd& x) const {
  const double e = std::max(0.0, std::abs(x(0)) - a_);
  return c_ * std::exp(-e * e / (2.0 * s_ * s_));
}

VectorXd PlateauDensity::gradient(const VectorXd& x) const {
  const double e = std::max(0.0, std::abs(x(0)) - a_);
  const double sign = x(0) >= 0 ? 1.0 : -1.0;
  return VectorXd::Constant(1, -sign * e / (s_ * s_) * c_ * std::exp(-e * e / (2.0 * s_ * s_)));
}

std::pair<double, double> PlateauDensity::support() const {
  return {-a_ - 8.0 * s_, a_ + 8.0 * s_};
}

double monte_carlo_variance(const Density& p, const VectorXd& x, double sigma, int n_mc,
                            Rng& rng) {
  if (n_mc < 2) throw InvalidParameter("n_mc must be at least 2");
  if (x.size() != p.dim()) throw DimensionMismatch("point dimension does not match the density");
  std::vector<double> ys(n_mc);
  VectorXd u(x.size());
  for (int s = 0; s < n_mc; ++s) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
    ys[s] = p.value(x + sigma * u);
  }
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= n_mc;
  double ss = 0.0;
  for (double y : ys) ss += (y - mean) * (y - mean);
  return ss / (n_mc - 1);
}

SlopeResult variance_identity_slope(const Density& p, const VectorXd& x,
                                    const std::vector<double>& sigmas, int n_mc,
                                    std::uint64_t seed) {
  if (sigmas.size() < 2) throw InvalidParameter("sigma grid needs at least two points");
  for (double s : sigmas) {
    if (!(s >= 1e-3 && s <= 1e-1)) throw InvalidParameter("sigma grid must lie in [1e-3, 1e-1]");
  }
  if (n_mc < 100000) throw InvalidParameter("n_mc must be at least 1e5");

  SlopeResult out;
  out.grad_sq = p.gradient(x).squaredNorm();
  if (std::sqrt(out.grad_sq) < 1e-10) {
    throw DegeneratePoint("density gradient vanishes at the evaluation point");
  }
  out.sigmas = sigmas;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    Rng rng(seed, "variance", k);
    out.variances.push_back(monte_carlo_variance(p, x, sigmas[k], n_mc, rng));
  }

  const double n = static_cast<double>(sigmas.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double lx = std::log(sigmas[k]);
    const double ly = std::log(out.variances[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw InvalidParameter("sigma grid needs at least two distinct values");
  out.slope = (n * sxy - sx * sy) / denom;

  const auto k_min = std::min_element(sigmas.begin(), sigmas.end()) - sigmas.begin();
  const double s_min = sigmas[k_min];
  out.ratio_at_min_sigma = out.variances[k_min] / (s_min * s_min * out.grad_sq);
  return out;
}

SlopeResult variance_identity_slope(const AnalyticDensityPair& pair, const VectorXd& x,
                                    const std::vector<double>& sigmas, int n_mc,
                                    std::uint64_t seed) {
  if (!pair.p_d) throw InvalidParameter("density pair has no data density");
  return variance_identity_slope(*pair.p_d, x, sigmas, n_mc, seed);
}

namespace {

// a * ln(a / m) with the 0 ln 0 = 0 convention, accurate when a is close to m.
double kl_term(double a, double m) {
  if (a <= 0.0) return 0.0;
  return a * std::log1p((a - m) / m);
}

double trapezoid_mass(const VectorXd& f, double h) {
  if (f.size() < 2) return 0.0;
  return h * (f.sum() - 0.5 * (f(0) + f(f.size() - 1)));
}

}  // namespace

double js_divergence(const VectorXd& p, const VectorXd& q, double h) {
  if (p.size() != q.size()) throw DimensionMismatch("densities must share a grid");
  VectorXd f(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p(i) + q(i));
    f(i) = m > 0.0 ? 0.5 * kl_term(p(i), m) + 0.5 * kl_term(q(i), m) : 0.0;
  }
  return std::max(0.0, trapezoid_mass(f, h));
}

std::vector<JsRow> js_convolution_decay(const Density& p, const std::vector<double>& sigmas,
                                        const JsOptions& opts) {
  if (p.dim() != 1) throw InvalidParameter("JS decay is defined for 1D densities");
  if (sigmas.empty()) throw InvalidParameter("sigma grid must be nonempty");
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    if (!(sigmas[k] >= 0.0)) throw InvalidParameter("sigmas must be non-negative");
    if (k > 0 && !(sigmas[k] < sigmas[k - 1])) {
      throw InvalidParameter("sigma grid must be strictly decreasing");
    }
  }
  if (opts.resolution < 16) throw InvalidParameter("resolution must be at least 16");

  const double s_max = sigmas.front();
  const auto [lo, hi] = p.support();
  const double a = lo - 8.0 * s_max;
  const double b = hi + 8.0 * s_max;
  const int n = opts.resolution;
  const double h = (b - a) / (n - 1);

  VectorXd dens(n);
  VectorXd x(1);
  for (int i = 0; i < n; ++i) {
    x(0) = a + i * h;
    dens(i) = p.value(x);
  }
  const double mass = trapezoid_mass(dens, h);
  if (std::abs(mass - 1.0) > 1e-6) {
    throw ResolutionTooCoarse("quadrature mass deficit " + std::to_string(std::abs(mass - 1.0)) +
                              " exceeds 1e-6; raise the resolution");
  }

  std::vector<JsRow> rows;
  for (double sigma : sigmas) {
    JsRow row;
    row.sigma = sigma;
    VectorXd smooth = dens;
    const int half = sigma > 0.0 ? static_cast<int>(std::ceil(8.0 * sigma / h)) : 0;
    if (half > 0) {
      VectorXd kernel(2 * half + 1);
      for (int j = -half; j <= half; ++j) {
        const double t = j * h / sigma;
        kernel(j + half) = std::exp(-0.5 * t * t);
      }
      kernel /= kernel.sum();
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const int j_lo = std::max(-half, i - (n - 1));
        const int j_hi = std::min(half, i);
        for (int j = j_lo; j <= j_hi; ++j) acc += kernel(j + half) * dens(i - j);
        smooth(i) = acc;
      }
      const double smooth_mass = trapezoid_mass(smooth, h);
      if (std::abs(smooth_mass - 1.0) > 1e-6) {
        throw ResolutionTooCoarse("smoothed mass deficit " +
                                  std::to_string(std::abs(smooth_mass - 1.0)) + " exceeds 1e-6");
      }
    }
    row.d_js = opts.swap_roles ? js_divergence(dens, smooth, h) : js_divergence(smooth, dens, h);
    row.ratio = sigma > 0.0 ? row.d_js / sigma : 0.0;
    rows.push_back(row);
  }
  return rows;
}

gan::TrainHooks make_hooks(const AugmentSpec& spec, const DaOptions& opts) {
  spec.validate();
  if (spec.kind != AugmentKind::GaussianNoise) {
    throw InvalidParameter("GAN inputs are 2D points; only noise augmentation applies");
  }
  if (spec.copies != 1) {
    throw InvalidParameter("training augmentation draws one replica per sample per step");
  }
  gan::TrainHooks hooks;
  hooks.g_followup_steps = opts.g_followup_steps;
  if (spec.sigma == 0.0) return hooks;
  auto perturb = [sigma = spec.sigma](MatrixXd& m, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) += sigma * rng.normal();
    }
  };
  if (opts.augment_real) hooks.augment_real = perturb;
  if (opts.augment_fake) hooks.augment_fake = perturb;
  return hooks;
}

std::vector<SpecSummary> da_experiment(const gan::GanConfig& cfg,
                                       const std::vector<AugmentSpec>& specs,
                                       const std::vector<std::uint64_t>& seeds,
                                       const DaOptions& opts, int threads) {
  if (specs.empty() || seeds.empty()) throw InvalidParameter("specs and seeds must be nonempty");
  for (const auto& s : specs) {
    if (s.kind != specs.front().kind) throw InvalidParameter("specs must share a common kind");
  }
  cfg.validate();

  std::vector<SpecSummary> out(specs.size());
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t a = 0; a < specs.size(); ++a) {
    out[a].spec = specs[a];
    out[a].seeds.resize(seeds.size());
    for (std::size_t b = 0; b < seeds.size(); ++b) jobs.emplace_back(a, b);
  }
  std::vector<gan::TrainHooks> hooks;
  for (const auto& s : specs) hooks.push_back(make_hooks(s, opts));

  parallel_for(jobs.size(), threads, [&](std::size_t job) {
    const auto [a, b] = jobs[job];
    gan::GanConfig c = cfg;
    c.seed = seeds[b];
    const gan::TrainResult res = gan::train(c, hooks[a]);
    SeedSummary& summary = out[a].seeds[b];
    summary.seed = seeds[b];
    summary.failure = res.failure;
    if (!res.rows.empty()) summary.medians = gan::final_medians(res.rows, opts.final_fraction);
  });
  return out;
}

}  // namespace lipcert::augment
