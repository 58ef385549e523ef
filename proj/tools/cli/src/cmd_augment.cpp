#include <cmath>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "lipcert/augment.hpp"
#include "lipcert/errors.hpp"
#include "lipcert/gan.hpp"

namespace lipcert::cli {
namespace {

using namespace lipcert::augment;

Eigen::Matrix4d hutchinson_matrix() {
  Eigen::Matrix4d a;
  a << 1, 2, 0, -1,
       0, 3, 1, 2,
       2, -1, 4, 0,
       1, 0, -2, 3;
  return a;
}

Json check_hutchinson(std::uint64_t seed, int samples, int replicates) {
  const Eigen::Matrix4d a = hutchinson_matrix();
  const MatVec mv = [&a](const VectorXd& u) -> VectorXd { return a * u; };
  const double truth = a.squaredNorm();
  const double estimate = hutchinson_fro_sq(mv, 4, samples, seed);
  const double rel_error = std::abs(estimate - truth) / truth;

  // Grand mean of independent small-sample estimates against the truth.
  const int per_replicate = 100;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < replicates; ++r) {
    const double e =
        hutchinson_fro_sq(mv, 4, per_replicate, derive_seed(seed, "hutchinson_replicate", r));
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / replicates;
  const double var = (sum_sq - replicates * mean * mean) / (replicates - 1);
  const double se = std::sqrt(std::max(var, 0.0) / replicates);
  const double z = se > 0.0 ? std::abs(mean - truth) / se : 0.0;

  Json doc;
  doc["check"] = "hutchinson";
  doc["truth"] = truth;
  doc["samples"] = samples;
  doc["estimate"] = estimate;
  doc["relative_error"] = rel_error;
  doc["relative_tolerance"] = 0.02;
  doc["replicates"] = replicates;
  doc["samples_per_replicate"] = per_replicate;
  doc["grand_mean"] = mean;
  doc["standard_error"] = se;
  doc["z_score"] = z;
  doc["z_tolerance"] = 3.0;
  doc["pass"] = rel_error <= 0.02 && z <= 3.0;
  return doc;
}

Json check_lemma13(std::uint64_t seed, int points, int n_mc) {
  const auto p = GaussianMixture::standard_normal_1d();
  const std::vector<double> sigmas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  Rng rng(seed, "lemma13_points");
  Json rows = Json::array();
  bool pass = true;
  for (int i = 0; i < points; ++i) {
    const double mag = rng.uniform(0.5, 3.0);
    const double x = rng.bernoulli(0.5) ? mag : -mag;
    VectorXd xv(1);
    xv << x;
    const auto r = variance_identity_slope(p, xv, sigmas, n_mc, derive_seed(seed, "lemma13", i));
    const bool ok = std::abs(r.slope - 2.0) <= 0.1 && std::abs(r.ratio_at_min_sigma - 1.0) <= 0.05;
    pass = pass && ok;
    rows.push_back(Json{{"x", x},
                        {"slope", r.slope},
                        {"ratio_at_min_sigma", r.ratio_at_min_sigma},
                        {"grad_sq", r.grad_sq},
                        {"pass", ok}});
  }
  Json doc;
  doc["check"] = "lemma13";
  doc["sigmas"] = sigmas;
  doc["n_mc"] = n_mc;
  doc["slope_target"] = 2.0;
  doc["slope_tolerance"] = 0.1;
  doc["ratio_tolerance"] = 0.05;
  doc["points"] = rows;
  doc["pass"] = pass;
  return doc;
}

Json check_jsdecay() {
  const auto p = GaussianMixture::standard_normal_1d();
  const std::vector<double> sigmas{0.1, 0.05, 0.025};
  const auto rows = js_convolution_decay(p, sigmas);
  bool decreasing = true;
  Json table = Json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && !(rows[i].ratio < rows[i - 1].ratio)) decreasing = false;
    table.push_back(Json{{"sigma", rows[i].sigma}, {"d_js", rows[i].d_js}, {"ratio", rows[i].ratio}});
  }
  const bool halved = rows.back().ratio < 0.5 * rows.front().ratio;
  Json doc;
  doc["check"] = "jsdecay";
  doc["rows"] = table;
  doc["strictly_decreasing"] = decreasing;
  doc["final_below_half_initial"] = halved;
  doc["pass"] = decreasing && halved;
  return doc;
}

class DaVerifyCommand : public Command {
 public:
  std::string name() const override { return "da-verify"; }
  std::string description() const override {
    return "Numerical checks behind data augmentation: hutchinson, lemma13, jsdecay";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("check", check_, "hutchinson, lemma13 or jsdecay")
        ->required()
        ->check(CLI::IsMember({"hutchinson", "lemma13", "jsdecay"}));
    sub.add_option("--samples", samples_, "Hutchinson probe vectors")->check(CLI::PositiveNumber);
    sub.add_option("--points", points_, "Evaluation points for lemma13")->check(CLI::PositiveNumber);
    sub.add_option("--n-mc", n_mc_, "Monte Carlo draws per sigma for lemma13");
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    const std::uint64_t seed = common_.resolved_seed();
    std::optional<OutputDir> dir;
    if (!common_.out.empty()) {
      dir.emplace(common_.out, common_.overwrite);
      dir->claim(check_ + ".json");
      dir->claim("config.json");
    }
    Json doc;
    if (check_ == "hutchinson") {
      doc = check_hutchinson(seed, samples_, 400);
    } else if (check_ == "lemma13") {
      doc = check_lemma13(seed, points_, n_mc_);
    } else {
      doc = check_jsdecay();
    }
    doc["seed"] = seed;
    const bool pass = doc["pass"].get<bool>();
    ctx.out << check_ << " " << (pass ? "pass" : "FAIL") << "\n";
    if (dir) {
      dir->write_json(check_ + ".json", doc);
      Json inputs{{"check", check_}, {"samples", samples_}, {"points", points_}, {"n_mc", n_mc_}};
      dir->write_json("config.json", config_echo(ctx, "da-verify", seed, inputs));
    } else {
      ctx.out << dump(doc);
    }
    return pass ? 0 : 2;
  }

 private:
  std::string check_;
  int samples_ = 1000000;
  int points_ = 10;
  int n_mc_ = 100000;
  CommonOptions common_;
};

class DaExperimentCommand : public Command {
 public:
  std::string name() const override { return "da-experiment"; }
  std::string description() const override {
    return "GAN training with noise-augmented discriminator inputs over a sigma grid";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("--config", config_, "GAN config JSON")->check(CLI::ExistingFile);
    sub.add_option("--sigmas", sigmas_, "Comma-separated noise scales");
    sub.add_option("--seeds", seeds_, "Seeds per sigma")->check(CLI::PositiveNumber);
    sub.add_option("--mode", mode_, "Augment both inputs, real only or fake only")
        ->check(CLI::IsMember({"both", "real", "fake"}));
    sub.add_option("--followup", followup_, "G-only steps against the final D")
        ->check(CLI::NonNegativeNumber);
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    if (common_.out.empty()) throw InvalidParameter("da-experiment needs --out <dir>");
    const nlohmann::json base =
        config_.empty() ? nlohmann::json::object() : read_json_file(config_);
    gan::GanConfig cfg = gan::config_from_json(base);
    cfg.seed = common_.resolved_seed(cfg.seed);
    cfg.validate();

    std::vector<AugmentSpec> specs;
    for (double s : parse_doubles(sigmas_, "--sigmas")) specs.push_back(AugmentSpec::noise(s));
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < seeds_; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    DaOptions opts;
    opts.augment_real = mode_ != "fake";
    opts.augment_fake = mode_ != "real";
    opts.g_followup_steps = followup_;

    const OutputDir dir(common_.out, common_.overwrite);
    dir.claim("da_summary.csv");
    dir.claim("config.json");
    const auto results = da_experiment(cfg, specs, seeds, opts, common_.threads);

    std::ostringstream csv;
    csv << "augment,sigma,seed,jac_d_x_fro,jac_g_z_fro,jac_v_z_fro,energy_distance,failed\n";
    bool any_failed = false;
    for (const auto& spec : results) {
      for (const auto& s : spec.seeds) {
        const auto& m = s.medians;
        any_failed = any_failed || s.failure.has_value();
        csv << mode_ << "," << full(spec.spec.sigma) << "," << s.seed << "," << full(m.jac_d_x_fro)
            << "," << full(m.jac_g_z_fro) << "," << full(m.jac_v_z_fro) << ","
            << full(m.energy_distance) << "," << (s.failure ? 1 : 0) << "\n";
      }
      std::vector<double> jd, jg, jv;
      for (const auto& s : spec.seeds) {
        jd.push_back(s.medians.jac_d_x_fro);
        jg.push_back(s.medians.jac_g_z_fro);
        jv.push_back(s.medians.jac_v_z_fro);
      }
      ctx.out << "sigma " << full(spec.spec.sigma) << " median jac_d_x_fro "
              << fixed(gan::median(jd), 4) << " jac_g_z_fro " << fixed(gan::median(jg), 4)
              << " jac_v_z_fro " << fixed(gan::median(jv), 4) << "\n";
    }
    dir.write_text("da_summary.csv", csv.str());
    Json inputs;
    inputs["config"] = Json::parse(gan::to_json(cfg).dump());
    inputs["sigmas"] = sigmas_;
    inputs["seeds"] = seeds_;
    inputs["mode"] = mode_;
    inputs["followup"] = followup_;
    dir.write_json("config.json", config_echo(ctx, "da-experiment", cfg.seed, inputs));
    return any_failed ? 2 : 0;
  }

 private:
  std::string config_;
  std::string sigmas_ = "0.05,0.2,0.5";
  int seeds_ = 5;
  std::string mode_ = "both";
  int followup_ = 0;
  CommonOptions common_;
};

}  // namespace

std::unique_ptr<Command> make_da_verify_command() { return std::make_unique<DaVerifyCommand>(); }
std::unique_ptr<Command> make_da_experiment_command() {
  return std::make_unique<DaExperimentCommand>();
}

}  // namespace lipcert::cli
