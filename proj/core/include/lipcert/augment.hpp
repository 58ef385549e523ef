#pragma once

// Data augmentation with its variance bookkeeping, the Hutchinson Frobenius
// estimator, analytic densities for checking the perturbed-density variance
// identity, the JS-convolution decay table, and augmented GAN sweeps.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lipcert/gan.hpp"
#include "lipcert/rng.hpp"

namespace lipcert::augment {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class AugmentKind { GaussianNoise, Translate };

struct AugmentSpec {
  AugmentKind kind = AugmentKind::GaussianNoise;
  double sigma = 0.0;  // GaussianNoise
  int shift = 0;       // Translate: shifts uniform on the integers [-shift, shift]
  int copies = 1;

  static AugmentSpec noise(double sigma, int copies = 1);
  static AugmentSpec translate(int shift, int copies = 1);

  /// Per-axis variance of the applied perturbation: sigma^2 or s(s+1)/3.
  double effective_variance() const;
  std::string label() const;
  void validate() const;
};

/// Image layout for grid data; every column is a row-major rows x cols image.
struct GridShape {
  int rows = 8;
  int cols = 8;
};

struct AugmentResult {
  MatrixXd batch;          // replica r of input j sits in column j * copies + r
  MatrixXd perturbations;  // noise added (noise) or 2 x N integer shifts (translate)
};

AugmentResult augment(const MatrixXd& batch, const AugmentSpec& spec, Rng& rng,
                      std::optional<GridShape> grid = std::nullopt);
AugmentResult augment(const MatrixXd& batch, const AugmentSpec& spec, std::uint64_t seed,
                      std::optional<GridShape> grid = std::nullopt);

/// 2 x count matrix of independent (dx, dy) shifts uniform on [-s, s]^2.
Eigen::MatrixXi translation_shifts(int s, int count, Rng& rng);

/// Zero-padded shift of a single grid image.
VectorXd shift_image(const VectorXd& image, GridShape grid, int dx, int dy);

/// 8x8 binary sprites: filled rectangles of side 2 to 4 near the centre.
MatrixXd sprite_dataset(int count, Rng& rng);

using MatVec = std::function<VectorXd(const VectorXd&)>;

/// (1 / n) sum ||A u||^2 over standard-normal u: unbiased for ||A||_F^2.
double hutchinson_fro_sq(const MatVec& matvec, int dim, int n_samples, std::uint64_t seed);

/// A differentiable density with an exact gradient.
class Density {
 public:
  virtual ~Density() = default;
  virtual int dim() const = 0;
  virtual double value(const VectorXd& x) const = 0;
  virtual VectorXd gradient(const VectorXd& x) const = 0;
  /// Interval (1D) holding all but 1e-12 of the mass.
  virtual std::pair<double, double> support() const = 0;
};

/// Isotropic Gaussian mixture in one or two dimensions.
class GaussianMixture : public Density {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<VectorXd> means,
                  std::vector<double> sigmas);
  static GaussianMixture standard_normal_1d();

  int dim() const override { return dim_; }
  double value(const VectorXd& x) const override;
  VectorXd gradient(const VectorXd& x) const override;
  std::pair<double, double> support() const override;

 private:
  int dim_;
  std::vector<double> weights_;
  std::vector<VectorXd> means_;
  std::vector<double> sigmas_;
};

/// 1D density constant on [-half_width, half_width] with Gaussian shoulders of
/// scale `tail`; differentiable everywhere.
class PlateauDensity : public Density {
 public:
  PlateauDensity(double half_width, double tail);

  int dim() const override { return 1; }
  double value(const VectorXd& x) const override;
  VectorXd gradient(const VectorXd& x) const override;
  std::pair<double, double> support() const override;

 private:
  double a_;
  double s_;
  double c_;
};

struct AnalyticDensityPair {
  std::shared_ptr<const Density> p_d;
  std::shared_ptr<const Density> p_g;
};

/// Sample variance of p(x + sigma u) over n_mc standard-normal u.
double monte_carlo_variance(const Density& p, const VectorXd& x, double sigma, int n_mc,
                            Rng& rng);

struct SlopeResult {
  double slope = 0.0;
  double ratio_at_min_sigma = 0.0;
  double grad_sq = 0.0;  // ||J_x(p)||^2
  std::vector<double> sigmas;
  std::vector<double> variances;
};

/// Log-log regression slope of Var(p(x + sigma u)) against sigma, and the
/// ratio Var / (sigma^2 ||J_x(p)||^2) at the smallest sigma.
SlopeResult variance_identity_slope(const Density& p, const VectorXd& x,
                                    const std::vector<double>& sigmas, int n_mc,
                                    std::uint64_t seed);
SlopeResult variance_identity_slope(const AnalyticDensityPair& pair, const VectorXd& x,
                                    const std::vector<double>& sigmas, int n_mc,
                                    std::uint64_t seed);

struct JsRow {
  double sigma = 0.0;
  double d_js = 0.0;
  double ratio = 0.0;  // d_js / sigma, 0 at sigma = 0
};

struct JsOptions {
  int resolution = 1 << 14;
  bool swap_roles = false;  // evaluate the integrand with p and its smoothing swapped
};

/// JS divergence (natural log) between p smoothed by N(0, sigma^2) and p, on a
/// uniform grid over the support padded by 8 sigma_max. Sigmas must be
/// non-negative and strictly decreasing.
std::vector<JsRow> js_convolution_decay(const Density& p, const std::vector<double>& sigmas,
                                        const JsOptions& opts = {});

/// Trapezoid JS divergence of two sampled densities on a uniform grid.
double js_divergence(const VectorXd& p, const VectorXd& q, double h);

struct DaOptions {
  bool augment_real = true;
  bool augment_fake = true;
  int g_followup_steps = 0;
  double final_fraction = 0.2;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  gan::MetricsRow medians;  // medians over the final fraction of telemetry rows
  std::optional<gan::TrainFailure> failure;
};

struct SpecSummary {
  AugmentSpec spec;
  std::vector<SeedSummary> seeds;
};

/// Training hooks that perturb D's real and/or fake inputs per the spec.
gan::TrainHooks make_hooks(const AugmentSpec& spec, const DaOptions& opts);

/// Trains one GAN per (spec, seed) with D's inputs augmented.
std::vector<SpecSummary> da_experiment(const gan::GanConfig& cfg,
                                       const std::vector<AugmentSpec>& specs,
                                       const std::vector<std::uint64_t>& seeds,
                                       const DaOptions& opts = {}, int threads = 1);

}  // namespace lipcert::augment
