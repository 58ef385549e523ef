#pragma once

// A small GAN laboratory on 2D synthetic data: measuring-function families,
// the empirical/population value variants, alternating Adam training with
// spectral or clipping regularization, and Jacobian-norm telemetry.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipcert/bounds.hpp"
#include "lipcert/lipschitz.hpp"
#include "lipcert/nn.hpp"
#include "lipcert/rng.hpp"

namespace lipcert::gan {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

enum class MeasuringKind { Saturating, Wgan, Lsgan, Ebgan };

std::string to_string(MeasuringKind k);
MeasuringKind parse_measuring_kind(const std::string& s);

/// The pair (psi1, psi2) defining V = E psi1(D(x)) + E psi2(1 - D(G(z))).
struct MeasuringFunctions {
  MeasuringKind kind = MeasuringKind::Saturating;
  double alpha = 0.05;  // Saturating: D output range [alpha, beta]
  double beta = 0.95;
  double a = -1.0;      // Lsgan: psi1(x) = -(x + a)^2, psi2(x) = -(x + b)^2
  double b = -1.0;
  double range_lo = 0.0;  // Lsgan: declared range of psi arguments
  double range_hi = 1.0;
  double r = 1.0;         // Ebgan margin
  double cap = 1.0;       // Wgan / Ebgan loss cap supplied by the caller

  static MeasuringFunctions saturating(double alpha = 0.05, double beta = 0.95);
  static MeasuringFunctions wgan(double cap);
  static MeasuringFunctions lsgan(double a = -1.0, double b = -1.0, double lo = 0.0,
                                  double hi = 1.0);
  static MeasuringFunctions ebgan(double r, double cap);

  double psi1(double x) const;
  double psi2(double x) const;
  double dpsi1(double x) const;
  double dpsi2(double x) const;
  double L_psi() const;
  double C() const;

  void validate() const;
};

/// Squashing head used by the saturating GAN: alpha + (beta - alpha) sigmoid(u),
/// then clamped to [alpha, beta]. Other families read the raw scalar.
struct DiscriminatorHead {
  bool squash = false;
  double alpha = 0.05;
  double beta = 0.95;

  double apply(double u) const;
  double derivative(double u) const;
  bool clamped(double u) const;
  double lipschitz() const { return squash ? (beta - alpha) / 4.0 : 1.0; }

  static DiscriminatorHead for_measuring(const MeasuringFunctions& psi);
};

struct Discriminator {
  nn::Mlp net;  // input_dim -> 1
  DiscriminatorHead head;

  RowVectorXd evaluate(const MatrixXd& xs) const;
};

enum class DatasetKind { EightGaussians, TwoMoons, Ring };

/// Synthetic 2D data, truncated by rejection to box() so that the data
/// diameter is known exactly.
struct Dataset {
  DatasetKind kind = DatasetKind::EightGaussians;
  double radius = 2.0;  // EightGaussians, Ring
  double sigma = 0.02;  // EightGaussians mode width
  double noise = 0.05;  // TwoMoons
  int k = 8;            // Ring: modes on the circle, width radius / 50

  lipschitz::Box box() const;
  MatrixXd sample(int count, Rng& rng) const;
  void validate() const;
};

std::string to_string(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string& s);

/// Uniform noise on [-1, 1]^dim.
MatrixXd sample_noise(int dim, int count, Rng& rng);

enum class SnMode { None, DOnly, GOnly, Both };

std::string to_string(SnMode m);
SnMode parse_sn_mode(const std::string& s);

struct GanConfig {
  Dataset dataset;
  int noise_dim = 2;
  int data_dim = 2;
  std::vector<Eigen::Index> d_hidden{64, 64};
  std::vector<Eigen::Index> g_hidden{64, 64};
  double leaky_slope = 0.2;
  MeasuringFunctions measuring;
  SnMode sn_mode = SnMode::None;
  std::optional<double> clip_c;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch = 64;
  int steps = 8000;
  int d_steps = 1;  // D updates per G update
  std::uint64_t seed = 0;
  int telemetry_every = 200;
  int telemetry_batch = 256;
  int energy_samples = 4096;

  void validate() const;
};

nlohmann::ordered_json to_json(const GanConfig& cfg);
GanConfig config_from_json(const nlohmann::json& doc);

struct MetricsRow {
  int step = 0;
  double loss_d = 0.0;  // -V on the step's batches (D minimizes it)
  double loss_g = 0.0;  // V_g = mean psi2(1 - D(G(z)))
  double jac_d_x_fro = 0.0;
  double jac_g_z_fro = 0.0;
  double jac_v_z_fro = 0.0;
  double energy_distance = 0.0;
  double lip_cert_d = 0.0;
  double lip_cert_g = 0.0;
};

extern const char* const kMetricsHeader;

/// One CSV line per row, fixed 17 significant digits.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

double median(std::vector<double> values);

/// Column-wise medians over rows whose step exceeds (1 - fraction) times the
/// last step; the step field holds the number of rows used.
MetricsRow final_medians(const std::vector<MetricsRow>& rows, double fraction = 0.2);

enum class ValueVariant { PopPop, PopEmp, EmpPop, EmpEmp };

/// mean psi1(D(x)) + mean psi2(1 - D(G(z))) over the given batches.
double gan_value(const MeasuringFunctions& psi, const Discriminator& d, const nn::Mlp& g,
                 const MatrixXd& xs, const MatrixXd& zs);

/// Per-sample v(D, G, x, z) = psi1(D(x)) + psi2(1 - D(G(z))) for paired columns.
RowVectorXd gan_value_terms(const MeasuringFunctions& psi, const Discriminator& d,
                            const nn::Mlp& g, const MatrixXd& xs, const MatrixXd& zs);

/// The variant decides which side is replaced by a fresh population draw of
/// pop_samples points (first half of the name refers to data, second to noise).
double gan_value(ValueVariant variant, const MeasuringFunctions& psi, const Discriminator& d,
                 const nn::Mlp& g, const MatrixXd& emp_x, const MatrixXd& emp_z,
                 const Dataset& data, Rng& rng, int pop_samples = 4096);

struct JacobianTelemetry {
  double jac_d_x_fro = 0.0;
  double jac_g_z_fro = 0.0;
  double jac_v_z_fro = 0.0;
};

/// Mean Frobenius norms of dD/dx over xs and the fakes G(zs), of dG/dz, and of
/// dv/dz for v(z) = psi2(1 - D(G(z))).
JacobianTelemetry jacobian_telemetry(const Discriminator& d, const nn::Mlp& g,
                                     const MeasuringFunctions& psi, const MatrixXd& xs,
                                     const MatrixXd& zs);

/// V-statistic 2 E||X - Y|| - E||X - X'|| - E||Y - Y'||, clipped at 0.
double energy_distance(const MatrixXd& real, const MatrixXd& fake);

/// Adam moments for one network.
struct AdamState {
  std::vector<MatrixXd> m_w, v_w;
  std::vector<VectorXd> m_b, v_b;
  long t = 0;

  void step(nn::Mlp& net, const std::vector<nn::LayerGradient>& grads, double lr, double beta1,
            double beta2, double eps = 1e-8);
};

/// Optional perturbations applied to D's real and fake inputs each step.
struct TrainHooks {
  std::function<void(MatrixXd&, Rng&)> augment_real;
  std::function<void(MatrixXd&, Rng&)> augment_fake;
  /// Extra G-only steps against the frozen final D.
  int g_followup_steps = 0;
};

struct TrainFailure {
  int step = 0;
  std::string quantity;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  Discriminator d;
  nn::Mlp g;
  std::int64_t clamp_activations = 0;
  std::int64_t head_evaluations = 0;
  std::optional<TrainFailure> failure;  // set when a loss turned non-finite
};

/// Initial networks for a config (seeded from cfg.seed).
Discriminator initial_discriminator(const GanConfig& cfg);
nn::Mlp initial_generator(const GanConfig& cfg);

TrainResult train(const GanConfig& cfg, const TrainHooks& hooks = {});

/// Telemetry row for given networks; randomness from derive_seed(seed, "telemetry", step).
MetricsRow telemetry_row(const GanConfig& cfg, const Discriminator& d, const nn::Mlp& g, int step);

/// Spectral-product certificate of D (head included) and of G.
double discriminator_certificate(const Discriminator& d);
double generator_certificate(const nn::Mlp& g);

struct RunBound {
  bounds::GanLambdaOptimum optimum;
  double L_d = 0.0;  // l-infinity-input constants fed into the bound
  double L_g = 0.0;
  bounds::GanBoundParams params;
};

/// Plugs certificates of the trained networks into the general GAN bound at
/// optimized cell edges.
RunBound gan_bound_for_run(const GanConfig& cfg, const Discriminator& d, const nn::Mlp& g,
                           double m, double delta = 0.05, double delta_x = 0.05);

}  // namespace lipcert::gan
