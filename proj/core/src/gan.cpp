#include "lipcert/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "lipcert/errors.hpp"

namespace lipcert::gan {

std::string to_string(MeasuringKind k) {
  switch (k) {
    case MeasuringKind::Saturating:
      return "saturating";
    case MeasuringKind::Wgan:
      return "wgan";
    case MeasuringKind::Lsgan:
      return "lsgan";
    case MeasuringKind::Ebgan:
      return "ebgan";
  }
  return "saturating";
}

MeasuringKind parse_measuring_kind(const std::string& s) {
  if (s == "saturating" || s == "Saturating") return MeasuringKind::Saturating;
  if (s == "wgan" || s == "Wgan") return MeasuringKind::Wgan;
  if (s == "lsgan" || s == "Lsgan") return MeasuringKind::Lsgan;
  if (s == "ebgan" || s == "Ebgan") return MeasuringKind::Ebgan;
  throw InvalidParameter("unknown measuring functions '" + s + "'");
}

MeasuringFunctions MeasuringFunctions::saturating(double alpha, double beta) {
  MeasuringFunctions f;
  f.kind = MeasuringKind::Saturating;
  f.alpha = alpha;
  f.beta = beta;
  f.validate();
  return f;
}

MeasuringFunctions MeasuringFunctions::wgan(double cap) {
  MeasuringFunctions f;
  f.kind = MeasuringKind::Wgan;
  f.cap = cap;
  f.validate();
  return f;
}

MeasuringFunctions MeasuringFunctions::lsgan(double a, double b, double lo, double hi) {
  MeasuringFunctions f;
  f.kind = MeasuringKind::Lsgan;
  f.a = a;
  f.b = b;
  f.range_lo = lo;
  f.range_hi = hi;
  f.validate();
  return f;
}

MeasuringFunctions MeasuringFunctions::ebgan(double r, double cap) {
  MeasuringFunctions f;
  f.kind = MeasuringKind::Ebgan;
  f.r = r;
  f.cap = cap;
  f.validate();
  return f;
}

double MeasuringFunctions::psi1(double x) const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return std::log(x);
    case MeasuringKind::Lsgan:
      return -(x + a) * (x + a);
    case MeasuringKind::Wgan:
    case MeasuringKind::Ebgan:
      return x;
  }
  return x;
}

double MeasuringFunctions::psi2(double x) const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return std::log(x);
    case MeasuringKind::Lsgan:
      return -(x + b) * (x + b);
    case MeasuringKind::Wgan:
      return x;
    case MeasuringKind::Ebgan:
      return std::max(0.0, r - x);
  }
  return x;
}

double MeasuringFunctions::dpsi1(double x) const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return 1.0 / x;
    case MeasuringKind::Lsgan:
      return -2.0 * (x + a);
    case MeasuringKind::Wgan:
    case MeasuringKind::Ebgan:
      return 1.0;
  }
  return 1.0;
}

double MeasuringFunctions::dpsi2(double x) const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return 1.0 / x;
    case MeasuringKind::Lsgan:
      return -2.0 * (x + b);
    case MeasuringKind::Wgan:
      return 1.0;
    case MeasuringKind::Ebgan:
      return x < r ? -1.0 : 0.0;
  }
  return 1.0;
}

double MeasuringFunctions::L_psi() const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return 1.0 / std::min(alpha, 1.0 - beta);
    case MeasuringKind::Lsgan: {
      double m = 0.0;
      for (double x : {range_lo, range_hi}) m = std::max({m, std::abs(x + a), std::abs(x + b)});
      return 2.0 * m;
    }
    case MeasuringKind::Wgan:
    case MeasuringKind::Ebgan:
      return 1.0;
  }
  return 1.0;
}

double MeasuringFunctions::C() const {
  switch (kind) {
    case MeasuringKind::Saturating:
      return std::max(std::abs(std::log(alpha)), std::abs(std::log(1.0 - beta)));
    case MeasuringKind::Lsgan: {
      double m = 0.0;
      for (double x : {range_lo, range_hi}) {
        m = std::max({m, (x + a) * (x + a), (x + b) * (x + b)});
      }
      return m;
    }
    case MeasuringKind::Wgan:
    case MeasuringKind::Ebgan:
      return cap;
  }
  return cap;
}

void MeasuringFunctions::validate() const {
  switch (kind) {
    case MeasuringKind::Saturating:
      if (!(alpha > 0.0 && alpha < beta && beta < 1.0)) {
        throw InvalidParameter("saturating GAN needs 0 < alpha < beta < 1");
      }
      break;
    case MeasuringKind::Lsgan:
      if (!(range_lo <= range_hi)) throw InvalidParameter("lsgan range must satisfy lo <= hi");
      break;
    case MeasuringKind::Wgan:
    case MeasuringKind::Ebgan:
      if (!(cap > 0.0)) throw InvalidParameter("loss cap must be positive");
      break;
  }
}

namespace {

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

double DiscriminatorHead::apply(double u) const {
  if (!squash) return u;
  return std::clamp(alpha + (beta - alpha) * sigmoid(u), alpha, beta);
}

double DiscriminatorHead::derivative(double u) const {
  if (!squash) return 1.0;
  if (clamped(u)) return 0.0;
  const double s = sigmoid(u);
  return (beta - alpha) * s * (1.0 - s);
}

bool DiscriminatorHead::clamped(double u) const {
  if (!squash) return false;
  const double raw = alpha + (beta - alpha) * sigmoid(u);
  return raw < alpha || raw > beta;
}

DiscriminatorHead DiscriminatorHead::for_measuring(const MeasuringFunctions& psi) {
  DiscriminatorHead h;
  h.squash = psi.kind == MeasuringKind::Saturating;
  h.alpha = psi.alpha;
  h.beta = psi.beta;
  return h;
}

RowVectorXd Discriminator::evaluate(const MatrixXd& xs) const {
  const MatrixXd u = nn::forward_batch(net, xs);
  return u.row(0).unaryExpr([this](double v) { return head.apply(v); });
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::EightGaussians:
      return "eight_gaussians";
    case DatasetKind::TwoMoons:
      return "two_moons";
    case DatasetKind::Ring:
      return "ring";
  }
  return "eight_gaussians";
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "eight_gaussians" || s == "EightGaussians") return DatasetKind::EightGaussians;
  if (s == "two_moons" || s == "TwoMoons") return DatasetKind::TwoMoons;
  if (s == "ring" || s == "Ring") return DatasetKind::Ring;
  throw InvalidParameter("unknown dataset '" + s + "'");
}

void Dataset::validate() const {
  switch (kind) {
    case DatasetKind::EightGaussians:
      if (!(radius > 0.0) || !(sigma >= 0.0)) {
        throw InvalidParameter("eight_gaussians needs radius > 0 and sigma >= 0");
      }
      break;
    case DatasetKind::TwoMoons:
      if (!(noise >= 0.0)) throw InvalidParameter("two_moons needs noise >= 0");
      break;
    case DatasetKind::Ring:
      if (!(radius > 0.0) || k < 1) throw InvalidParameter("ring needs radius > 0 and k >= 1");
      break;
  }
}

lipschitz::Box Dataset::box() const {
  switch (kind) {
    case DatasetKind::EightGaussians: {
      const double h = radius + 4.0 * sigma;
      return lipschitz::Box::cube(2, -h, h);
    }
    case DatasetKind::TwoMoons: {
      const double pad = 4.0 * noise;
      lipschitz::Box b{VectorXd(2), VectorXd(2)};
      b.lower << -1.0 - pad, -0.5 - pad;
      b.upper << 2.0 + pad, 1.0 + pad;
      return b;
    }
    case DatasetKind::Ring: {
      const double h = radius + 4.0 * radius / 50.0;
      return lipschitz::Box::cube(2, -h, h);
    }
  }
  return lipschitz::Box::cube(2, -1.0, 1.0);
}

MatrixXd Dataset::sample(int count, Rng& rng) const {
  validate();
  const lipschitz::Box b = box();
  MatrixXd out(2, count);
  VectorXd x(2);
  for (int j = 0; j < count; ++j) {
    do {
      switch (kind) {
        case DatasetKind::EightGaussians:
        case DatasetKind::Ring: {
          const int modes = kind == DatasetKind::Ring ? k : 8;
          const double width = kind == DatasetKind::Ring ? radius / 50.0 : sigma;
          const double angle = 2.0 * std::numbers::pi * rng.uniform_int(0, modes - 1) / modes;
          x(0) = radius * std::cos(angle) + width * rng.normal();
          x(1) = radius * std::sin(angle) + width * rng.normal();
          break;
        }
        case DatasetKind::TwoMoons: {
          const bool upper = rng.bernoulli(0.5);
          const double t = rng.uniform(0.0, std::numbers::pi);
          x(0) = upper ? std::cos(t) : 1.0 - std::cos(t);
          x(1) = upper ? std::sin(t) : 0.5 - std::sin(t);
          x(0) += noise * rng.normal();
          x(1) += noise * rng.normal();
          break;
        }
      }
    } while (!b.contains(x));
    out.col(j) = x;
  }
  return out;
}

MatrixXd sample_noise(int dim, int count, Rng& rng) {
  MatrixXd z(dim, count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < dim; ++i) z(i, j) = rng.uniform(-1.0, 1.0);
  }
  return z;
}

std::string to_string(SnMode m) {
  switch (m) {
    case SnMode::None:
      return "None";
    case SnMode::DOnly:
      return "DOnly";
    case SnMode::GOnly:
      return "GOnly";
    case SnMode::Both:
      return "Both";
  }
  return "None";
}

SnMode parse_sn_mode(const std::string& s) {
  if (s == "None" || s == "none") return SnMode::None;
  if (s == "DOnly" || s == "d_only") return SnMode::DOnly;
  if (s == "GOnly" || s == "g_only") return SnMode::GOnly;
  if (s == "Both" || s == "both") return SnMode::Both;
  throw InvalidParameter("unknown sn_mode '" + s + "'");
}

void GanConfig::validate() const {
  dataset.validate();
  measuring.validate();
  if (batch < 2) throw InvalidParameter("batch must be at least 2");
  if (!(lr > 0.0)) throw InvalidParameter("lr must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw InvalidParameter("beta1 and beta2 must lie in (0, 1)");
  }
  if (sn_mode != SnMode::None && clip_c) {
    throw InvalidParameter("sn_mode and clip_c cannot both be active");
  }
  if (clip_c && !(*clip_c > 0.0)) throw InvalidParameter("clip_c must be positive");
  if (steps < 0) throw InvalidParameter("steps must be non-negative");
  if (d_steps < 1) throw InvalidParameter("d_steps must be at least 1");
  if (noise_dim < 1) throw InvalidParameter("noise_dim must be at least 1");
  if (data_dim != 2) throw InvalidParameter("datasets are two-dimensional; data_dim must be 2");
  if (telemetry_every < 1 || telemetry_batch < 1 || energy_samples < 1) {
    throw InvalidParameter("telemetry sizes must be at least 1");
  }
  for (auto w : d_hidden) {
    if (w < 1) throw InvalidParameter("hidden widths must be positive");
  }
  for (auto w : g_hidden) {
    if (w < 1) throw InvalidParameter("hidden widths must be positive");
  }
}

nlohmann::ordered_json to_json(const GanConfig& cfg) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"kind", to_string(cfg.dataset.kind)},
                  {"radius", cfg.dataset.radius},
                  {"sigma", cfg.dataset.sigma},
                  {"noise", cfg.dataset.noise},
                  {"k", cfg.dataset.k}};
  j["noise_dim"] = cfg.noise_dim;
  j["data_dim"] = cfg.data_dim;
  j["d_hidden"] = cfg.d_hidden;
  j["g_hidden"] = cfg.g_hidden;
  j["leaky_slope"] = cfg.leaky_slope;
  j["measuring"] = {{"kind", to_string(cfg.measuring.kind)},
                    {"alpha", cfg.measuring.alpha},
                    {"beta", cfg.measuring.beta},
                    {"a", cfg.measuring.a},
                    {"b", cfg.measuring.b},
                    {"range_lo", cfg.measuring.range_lo},
                    {"range_hi", cfg.measuring.range_hi},
                    {"r", cfg.measuring.r},
                    {"cap", cfg.measuring.cap}};
  j["sn_mode"] = to_string(cfg.sn_mode);
  j["clip_c"] = cfg.clip_c ? nlohmann::ordered_json(*cfg.clip_c) : nlohmann::ordered_json();
  j["lr"] = cfg.lr;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["batch"] = cfg.batch;
  j["steps"] = cfg.steps;
  j["d_steps"] = cfg.d_steps;
  j["seed"] = cfg.seed;
  j["telemetry_every"] = cfg.telemetry_every;
  j["telemetry_batch"] = cfg.telemetry_batch;
  j["energy_samples"] = cfg.energy_samples;
  return j;
}

namespace {

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& doc, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& item : doc.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw InvalidParameter("unknown " + where + " field '" + item.key() + "'");
    }
  }
}

}  // namespace

GanConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidParameter("GAN config must be a JSON object");
  reject_unknown(doc,
                 {"dataset", "noise_dim", "data_dim", "d_hidden", "g_hidden", "leaky_slope",
                  "measuring", "sn_mode", "clip_c", "lr", "beta1", "beta2", "batch", "steps",
                  "d_steps", "seed", "telemetry_every", "telemetry_batch", "energy_samples"},
                 "config");
  GanConfig cfg;
  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    reject_unknown(d, {"kind", "radius", "sigma", "noise", "k"}, "dataset");
    if (d.contains("kind")) cfg.dataset.kind = parse_dataset_kind(d.at("kind").get<std::string>());
    read_field(d, "radius", cfg.dataset.radius);
    read_field(d, "sigma", cfg.dataset.sigma);
    read_field(d, "noise", cfg.dataset.noise);
    read_field(d, "k", cfg.dataset.k);
  }
  if (doc.contains("measuring")) {
    const auto& m = doc.at("measuring");
    reject_unknown(m, {"kind", "alpha", "beta", "a", "b", "range_lo", "range_hi", "r", "cap"},
                   "measuring");
    if (m.contains("kind")) {
      cfg.measuring.kind = parse_measuring_kind(m.at("kind").get<std::string>());
    }
    read_field(m, "alpha", cfg.measuring.alpha);
    read_field(m, "beta", cfg.measuring.beta);
    read_field(m, "a", cfg.measuring.a);
    read_field(m, "b", cfg.measuring.b);
    read_field(m, "range_lo", cfg.measuring.range_lo);
    read_field(m, "range_hi", cfg.measuring.range_hi);
    read_field(m, "r", cfg.measuring.r);
    read_field(m, "cap", cfg.measuring.cap);
  }
  read_field(doc, "noise_dim", cfg.noise_dim);
  read_field(doc, "data_dim", cfg.data_dim);
  read_field(doc, "d_hidden", cfg.d_hidden);
  read_field(doc, "g_hidden", cfg.g_hidden);
  read_field(doc, "leaky_slope", cfg.leaky_slope);
  if (doc.contains("sn_mode")) cfg.sn_mode = parse_sn_mode(doc.at("sn_mode").get<std::string>());
  if (doc.contains("clip_c") && !doc.at("clip_c").is_null()) {
    double c = 0.0;
    read_field(doc, "clip_c", c);
    cfg.clip_c = c;
  }
  read_field(doc, "lr", cfg.lr);
  read_field(doc, "beta1", cfg.beta1);
  read_field(doc, "beta2", cfg.beta2);
  read_field(doc, "batch", cfg.batch);
  read_field(doc, "steps", cfg.steps);
  read_field(doc, "d_steps", cfg.d_steps);
  read_field(doc, "seed", cfg.seed);
  read_field(doc, "telemetry_every", cfg.telemetry_every);
  read_field(doc, "telemetry_batch", cfg.telemetry_batch);
  read_field(doc, "energy_samples", cfg.energy_samples);
  cfg.validate();
  return cfg;
}

const char* const kMetricsHeader =
    "step,loss_d,loss_g,jac_d_x_fro,jac_g_z_fro,jac_v_z_fro,energy_distance,lip_cert_d,lip_cert_g";

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = kMetricsHeader;
  out += '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  r.loss_d, r.loss_g, r.jac_d_x_fro, r.jac_g_z_fro, r.jac_v_z_fro,
                  r.energy_distance, r.lip_cert_d, r.lip_cert_g);
    out += buf;
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidParameter("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricsRow final_medians(const std::vector<MetricsRow>& rows, double fraction) {
  if (rows.empty()) throw InvalidParameter("no telemetry rows");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidParameter("fraction must lie in (0, 1]");
  const double cutoff = (1.0 - fraction) * rows.back().step;
  std::vector<const MetricsRow*> window;
  for (const auto& r : rows) {
    if (r.step > cutoff) window.push_back(&r);
  }
  auto med = [&window](double MetricsRow::*field) {
    std::vector<double> v;
    for (const auto* r : window) v.push_back(r->*field);
    return median(std::move(v));
  };
  MetricsRow out;
  out.step = static_cast<int>(window.size());
  out.loss_d = med(&MetricsRow::loss_d);
  out.loss_g = med(&MetricsRow::loss_g);
  out.jac_d_x_fro = med(&MetricsRow::jac_d_x_fro);
  out.jac_g_z_fro = med(&MetricsRow::jac_g_z_fro);
  out.jac_v_z_fro = med(&MetricsRow::jac_v_z_fro);
  out.energy_distance = med(&MetricsRow::energy_distance);
  out.lip_cert_d = med(&MetricsRow::lip_cert_d);
  out.lip_cert_g = med(&MetricsRow::lip_cert_g);
  return out;
}

RowVectorXd gan_value_terms(const MeasuringFunctions& psi, const Discriminator& d,
                            const nn::Mlp& g, const MatrixXd& xs, const MatrixXd& zs) {
  if (xs.cols() != zs.cols()) throw DimensionMismatch("paired terms need equal batch sizes");
  const RowVectorXd dx = d.evaluate(xs);
  const RowVectorXd dg = d.evaluate(nn::forward_batch(g, zs));
  RowVectorXd out(xs.cols());
  for (Eigen::Index j = 0; j < xs.cols(); ++j) out(j) = psi.psi1(dx(j)) + psi.psi2(1.0 - dg(j));
  return out;
}

double gan_value(const MeasuringFunctions& psi, const Discriminator& d, const nn::Mlp& g,
                 const MatrixXd& xs, const MatrixXd& zs) {
  if (xs.cols() == 0 || zs.cols() == 0) throw InvalidParameter("batches must be nonempty");
  const RowVectorXd dx = d.evaluate(xs);
  const RowVectorXd dg = d.evaluate(nn::forward_batch(g, zs));
  double real = 0.0;
  for (Eigen::Index j = 0; j < dx.size(); ++j) real += psi.psi1(dx(j));
  double fake = 0.0;
  for (Eigen::Index j = 0; j < dg.size(); ++j) fake += psi.psi2(1.0 - dg(j));
  return real / static_cast<double>(dx.size()) + fake / static_cast<double>(dg.size());
}

double gan_value(ValueVariant variant, const MeasuringFunctions& psi, const Discriminator& d,
                 const nn::Mlp& g, const MatrixXd& emp_x, const MatrixXd& emp_z,
                 const Dataset& data, Rng& rng, int pop_samples) {
  if (pop_samples < 1) throw InvalidParameter("pop_samples must be at least 1");
  const bool pop_x = variant == ValueVariant::PopPop || variant == ValueVariant::PopEmp;
  const bool pop_z = variant == ValueVariant::PopPop || variant == ValueVariant::EmpPop;
  const MatrixXd xs = pop_x ? data.sample(pop_samples, rng) : emp_x;
  const MatrixXd zs =
      pop_z ? sample_noise(static_cast<int>(g.input_dim()), pop_samples, rng) : emp_z;
  return gan_value(psi, d, g, xs, zs);
}

namespace {

double mean_column_norm(const MatrixXd& m) {
  if (m.cols() == 0) return 0.0;
  return m.colwise().norm().sum() / static_cast<double>(m.cols());
}

// Per-sample dD/du at the raw scalar outputs u.
RowVectorXd head_derivatives(const DiscriminatorHead& head, const MatrixXd& u) {
  return u.row(0).unaryExpr([&head](double v) { return head.derivative(v); });
}

}  // namespace

JacobianTelemetry jacobian_telemetry(const Discriminator& d, const nn::Mlp& g,
                                     const MeasuringFunctions& psi, const MatrixXd& xs,
                                     const MatrixXd& zs) {
  if (xs.cols() == 0 || zs.cols() == 0) throw InvalidParameter("batches must be nonempty");
  JacobianTelemetry t;

  nn::ForwardCache g_cache;
  const MatrixXd fake = nn::forward_batch(g, zs, &g_cache);

  MatrixXd mixed(xs.rows(), xs.cols() + fake.cols());
  mixed << xs, fake;
  nn::ForwardCache d_cache;
  const MatrixXd u = nn::forward_batch(d.net, mixed, &d_cache);
  const MatrixXd d_grads = nn::backward(d.net, d_cache, head_derivatives(d.head, u), nullptr).input;
  t.jac_d_x_fro = mean_column_norm(d_grads);

  // v(z) = psi2(1 - D(G(z))): dv/dD = -psi2'(1 - D).
  const Eigen::Index nf = fake.cols();
  const MatrixXd u_fake = u.rightCols(nf);
  RowVectorXd upstream(nf);
  for (Eigen::Index j = 0; j < nf; ++j) {
    const double dval = d.head.apply(u_fake(0, j));
    upstream(j) = -psi.dpsi2(1.0 - dval) * d.head.derivative(u_fake(0, j));
  }
  nn::ForwardCache fake_cache;
  nn::forward_batch(d.net, fake, &fake_cache);
  const MatrixXd gx = nn::backward(d.net, fake_cache, upstream, nullptr).input;
  t.jac_v_z_fro = mean_column_norm(nn::backward(g, g_cache, gx, nullptr).input);

  VectorXd fro_sq = VectorXd::Zero(nf);
  for (Eigen::Index i = 0; i < g.output_dim(); ++i) {
    MatrixXd e = MatrixXd::Zero(g.output_dim(), nf);
    e.row(i).setOnes();
    fro_sq += nn::backward(g, g_cache, e, nullptr).input.colwise().squaredNorm().transpose();
  }
  t.jac_g_z_fro = fro_sq.cwiseSqrt().mean();
  return t;
}

double energy_distance(const MatrixXd& real, const MatrixXd& fake) {
  if (real.cols() == 0 || fake.cols() == 0) throw InvalidParameter("samples must be nonempty");
  if (real.rows() != fake.rows()) throw DimensionMismatch("samples must share a dimension");
  auto within = [](const MatrixXd& s) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      for (Eigen::Index j = i + 1; j < s.cols(); ++j) total += (s.col(i) - s.col(j)).norm();
    }
    return 2.0 * total / static_cast<double>(s.cols() * s.cols());
  };
  double cross = 0.0;
  for (Eigen::Index i = 0; i < real.cols(); ++i) {
    for (Eigen::Index j = 0; j < fake.cols(); ++j) cross += (real.col(i) - fake.col(j)).norm();
  }
  cross /= static_cast<double>(real.cols() * fake.cols());
  return std::max(0.0, 2.0 * cross - within(real) - within(fake));
}

void AdamState::step(nn::Mlp& net, const std::vector<nn::LayerGradient>& grads, double lr,
                     double beta1, double beta2, double eps) {
  if (grads.size() != net.depth()) throw DimensionMismatch("one gradient per layer required");
  if (m_w.empty()) {
    for (const auto& l : net.layers()) {
      m_w.push_back(MatrixXd::Zero(l.out_dim(), l.in_dim()));
      v_w.push_back(MatrixXd::Zero(l.out_dim(), l.in_dim()));
      m_b.push_back(VectorXd::Zero(l.bias ? l.out_dim() : 0));
      v_b.push_back(VectorXd::Zero(l.bias ? l.out_dim() : 0));
    }
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < net.depth(); ++k) {
    auto& l = net.layer(k);
    m_w[k] = beta1 * m_w[k] + (1.0 - beta1) * grads[k].weights;
    v_w[k] = beta2 * v_w[k] + (1.0 - beta2) * grads[k].weights.cwiseAbs2();
    l.weights.array() -=
        lr * (m_w[k].array() / c1) / ((v_w[k].array() / c2).sqrt() + eps);
    if (l.bias) {
      m_b[k] = beta1 * m_b[k] + (1.0 - beta1) * grads[k].bias;
      v_b[k] = beta2 * v_b[k] + (1.0 - beta2) * grads[k].bias.cwiseAbs2();
      l.bias->array() -= lr * (m_b[k].array() / c1) / ((v_b[k].array() / c2).sqrt() + eps);
    }
  }
}

Discriminator initial_discriminator(const GanConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, "init_d");
  nn::InitSpec spec;
  spec.widths = cfg.d_hidden;
  spec.widths.push_back(1);
  spec.hidden = nn::Activation::leaky_relu(cfg.leaky_slope);
  spec.output = nn::Activation::identity();
  return Discriminator{nn::make_mlp(cfg.data_dim, spec, rng),
                       DiscriminatorHead::for_measuring(cfg.measuring)};
}

nn::Mlp initial_generator(const GanConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, "init_g");
  nn::InitSpec spec;
  spec.widths = cfg.g_hidden;
  spec.widths.push_back(cfg.data_dim);
  spec.hidden = nn::Activation::leaky_relu(cfg.leaky_slope);
  spec.output = nn::Activation::identity();
  return nn::make_mlp(cfg.noise_dim, spec, rng);
}

double discriminator_certificate(const Discriminator& d) {
  return lipschitz::certify(d.net, lipschitz::Method::SpectralProduct).bound * d.head.lipschitz();
}

double generator_certificate(const nn::Mlp& g) {
  return lipschitz::certify(g, lipschitz::Method::SpectralProduct).bound;
}

MetricsRow telemetry_row(const GanConfig& cfg, const Discriminator& d, const nn::Mlp& g,
                         int step) {
  Rng rng(cfg.seed, "telemetry", static_cast<std::uint64_t>(step));
  const MatrixXd xs = cfg.dataset.sample(cfg.telemetry_batch, rng);
  const MatrixXd zs = sample_noise(cfg.noise_dim, cfg.telemetry_batch, rng);
  const JacobianTelemetry jac = jacobian_telemetry(d, g, cfg.measuring, xs, zs);

  const MatrixXd real = cfg.dataset.sample(cfg.energy_samples, rng);
  const MatrixXd fake = nn::forward_batch(g, sample_noise(cfg.noise_dim, cfg.energy_samples, rng));

  MetricsRow row;
  row.step = step;
  row.jac_d_x_fro = jac.jac_d_x_fro;
  row.jac_g_z_fro = jac.jac_g_z_fro;
  row.jac_v_z_fro = jac.jac_v_z_fro;
  row.energy_distance = energy_distance(real, fake);
  row.lip_cert_d = discriminator_certificate(d);
  row.lip_cert_g = generator_certificate(g);
  return row;
}

namespace {

// Projection used every step: power iteration warm-started from the previous
// step's singular vector, with a cold full-length fallback.
void project_layers(nn::Mlp& net, std::vector<VectorXd>& warm, double cap) {
  warm.resize(net.depth());
  lipschitz::PowerIterationOptions fast;
  fast.tol = 1e-9;
  fast.max_iter = 100;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    auto& w = net.layer(k).weights;
    auto res = lipschitz::spectral_norm_from(w, warm[k], fast);
    if (!res.converged) {
      warm[k].resize(0);
      res = lipschitz::spectral_norm_from(w, warm[k]);
    }
    if (res.value > cap * (1.0 + fast.tol)) w *= cap / res.value;
  }
}

void clip_layers(nn::Mlp& net, double c) {
  for (auto& l : net.layers()) l.weights = l.weights.cwiseMax(-c).cwiseMin(c);
}

std::vector<nn::LayerGradient> add(std::vector<nn::LayerGradient> a,
                                   const std::vector<nn::LayerGradient>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k].weights += b[k].weights;
    if (a[k].bias.size()) a[k].bias += b[k].bias;
  }
  return a;
}

class Trainer {
 public:
  Trainer(const GanConfig& cfg, const TrainHooks& hooks)
      : cfg_(cfg), hooks_(hooks), rng_(cfg.seed, "train") {
    result_.d = initial_discriminator(cfg);
    result_.g = initial_generator(cfg);
  }

  TrainResult run() {
    const int total = cfg_.steps + (cfg_.steps > 0 ? hooks_.g_followup_steps : 0);
    for (int step = 1; step <= total; ++step) {
      MetricsRow losses;
      if (step <= cfg_.steps) {
        for (int i = 0; i < cfg_.d_steps; ++i) {
          if (!d_step(step, losses.loss_d)) return std::move(result_);
        }
      } else {
        losses.loss_d = last_loss_d_;
      }
      if (!g_step(step, losses.loss_g)) return std::move(result_);
      if (step % cfg_.telemetry_every == 0 || step == total) {
        MetricsRow row = telemetry_row(cfg_, result_.d, result_.g, step);
        row.loss_d = losses.loss_d;
        row.loss_g = losses.loss_g;
        result_.rows.push_back(row);
      }
    }
    return std::move(result_);
  }

 private:
  bool sn_d() const { return cfg_.sn_mode == SnMode::DOnly || cfg_.sn_mode == SnMode::Both; }
  bool sn_g() const { return cfg_.sn_mode == SnMode::GOnly || cfg_.sn_mode == SnMode::Both; }

  bool fail(int step, const std::string& quantity) {
    result_.failure = TrainFailure{step, quantity};
    return false;
  }

  // Returns per-sample dD/du and records clamp activity.
  RowVectorXd head_terms(const MatrixXd& u, RowVectorXd& dvals) {
    const auto& head = result_.d.head;
    dvals.resize(u.cols());
    RowVectorXd deriv(u.cols());
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      dvals(j) = head.apply(u(0, j));
      deriv(j) = head.derivative(u(0, j));
      if (head.clamped(u(0, j))) ++result_.clamp_activations;
    }
    result_.head_evaluations += u.cols();
    return deriv;
  }

  bool d_step(int step, double& loss_d) {
    const auto& psi = cfg_.measuring;
    MatrixXd xs = cfg_.dataset.sample(cfg_.batch, rng_);
    const MatrixXd zs = sample_noise(cfg_.noise_dim, cfg_.batch, rng_);
    MatrixXd fake = nn::forward_batch(result_.g, zs);
    if (hooks_.augment_real) hooks_.augment_real(xs, rng_);
    if (hooks_.augment_fake) hooks_.augment_fake(fake, rng_);

    auto& dnet = result_.d.net;
    nn::ForwardCache real_cache;
    nn::ForwardCache fake_cache;
    const MatrixXd u_real = nn::forward_batch(dnet, xs, &real_cache);
    const MatrixXd u_fake = nn::forward_batch(dnet, fake, &fake_cache);
    RowVectorXd d_real;
    RowVectorXd d_fake;
    RowVectorXd up_real = head_terms(u_real, d_real);
    RowVectorXd up_fake = head_terms(u_fake, d_fake);

    double v_real = 0.0;
    double v_fake = 0.0;
    for (Eigen::Index j = 0; j < up_real.size(); ++j) {
      v_real += psi.psi1(d_real(j));
      up_real(j) *= -psi.dpsi1(d_real(j));
    }
    for (Eigen::Index j = 0; j < up_fake.size(); ++j) {
      v_fake += psi.psi2(1.0 - d_fake(j));
      up_fake(j) *= psi.dpsi2(1.0 - d_fake(j));
    }
    loss_d = -(v_real / static_cast<double>(up_real.size()) +
               v_fake / static_cast<double>(up_fake.size()));
    last_loss_d_ = loss_d;
    if (!std::isfinite(loss_d)) return fail(step, "loss_d");

    const auto grads = add(nn::backward(dnet, real_cache, up_real).layers,
                           nn::backward(dnet, fake_cache, up_fake).layers);
    adam_d_.step(dnet, grads, cfg_.lr, cfg_.beta1, cfg_.beta2);
    if (sn_d()) project_layers(dnet, warm_d_, 1.0);
    if (cfg_.clip_c) clip_layers(dnet, *cfg_.clip_c);
    return true;
  }

  bool g_step(int step, double& loss_g) {
    const auto& psi = cfg_.measuring;
    const MatrixXd zs = sample_noise(cfg_.noise_dim, cfg_.batch, rng_);
    nn::ForwardCache g_cache;
    MatrixXd fake = nn::forward_batch(result_.g, zs, &g_cache);
    if (hooks_.augment_fake) hooks_.augment_fake(fake, rng_);

    nn::ForwardCache d_cache;
    const MatrixXd u = nn::forward_batch(result_.d.net, fake, &d_cache);
    RowVectorXd dvals;
    RowVectorXd up = head_terms(u, dvals);
    double total = 0.0;
    for (Eigen::Index j = 0; j < up.size(); ++j) {
      total += psi.psi2(1.0 - dvals(j));
      up(j) *= -psi.dpsi2(1.0 - dvals(j));
    }
    loss_g = total / static_cast<double>(up.size());
    if (!std::isfinite(loss_g)) return fail(step, "loss_g");

    const MatrixXd gx = nn::backward(result_.d.net, d_cache, up).input;
    const auto grads = nn::backward(result_.g, g_cache, gx).layers;
    adam_g_.step(result_.g, grads, cfg_.lr, cfg_.beta1, cfg_.beta2);
    if (sn_g()) project_layers(result_.g, warm_g_, 1.0);
    return true;
  }

  const GanConfig& cfg_;
  const TrainHooks& hooks_;
  Rng rng_;
  TrainResult result_;
  AdamState adam_d_;
  AdamState adam_g_;
  std::vector<VectorXd> warm_d_;
  std::vector<VectorXd> warm_g_;
  double last_loss_d_ = 0.0;
};

}  // namespace

TrainResult train(const GanConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (hooks.g_followup_steps < 0) throw InvalidParameter("g_followup_steps must be >= 0");
  return Trainer(cfg, hooks).run();
}

RunBound gan_bound_for_run(const GanConfig& cfg, const Discriminator& d, const nn::Mlp& g,
                           double m, double delta, double delta_x) {
  const double cert_d = discriminator_certificate(d);
  const double cert_g = generator_certificate(g);
  RunBound out;
  out.L_d = lipschitz::to_linf_input(cert_d, cfg.data_dim).linf;
  out.L_g = lipschitz::to_linf_input(cert_g, cfg.noise_dim).linf;

  bounds::GanBoundParams p;
  p.L_psi = cfg.measuring.L_psi();
  p.L_d = out.L_d;
  p.L_g = out.L_g;
  p.C = cfg.measuring.C();
  p.B_x = cfg.dataset.box().linf_diameter();
  p.B_z = 2.0;
  p.n_x = cfg.data_dim;
  p.n = cfg.noise_dim;
  p.m = m;
  p.delta = delta;
  p.delta_x = delta_x;
  out.optimum = bounds::optimize_gan_lambdas(p);
  p.lambda = out.optimum.lambda;
  p.lambda_x = out.optimum.lambda_x;
  out.params = p;
  return out;
}

}  // namespace lipcert::gan
