#include <ostream>
#include <sstream>

#include "common.hpp"
#include "lipcert/errors.hpp"
#include "lipcert/gan.hpp"
#include "lipcert/parallel.hpp"

namespace lipcert::cli {
namespace {

using namespace lipcert::gan;

/// A sweep value as JSON: numbers stay numbers (integral ones integral),
/// "null" clears the field, anything else is a string.
nlohmann::json sweep_value(const std::string& text) {
  if (text == "null") return nullptr;
  std::size_t used = 0;
  try {
    const double v = std::stod(text, &used);
    if (used == text.size()) {
      if (text.find_first_of(".eE") == std::string::npos) return static_cast<long long>(v);
      return v;
    }
  } catch (const std::exception&) {
  }
  return text;
}

void set_key(nlohmann::json& doc, const std::string& key, const nlohmann::json& value) {
  nlohmann::json* node = &doc;
  const auto parts = split(key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) throw InvalidParameter("unknown sweep key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) throw InvalidParameter("unknown sweep key '" + key + "'");
  (*node)[parts.back()] = value;
}

Json row_json(const MetricsRow& r) {
  return Json{{"rows_used", r.step},
              {"loss_d", r.loss_d},
              {"loss_g", r.loss_g},
              {"jac_d_x_fro", r.jac_d_x_fro},
              {"jac_g_z_fro", r.jac_g_z_fro},
              {"jac_v_z_fro", r.jac_v_z_fro},
              {"energy_distance", r.energy_distance},
              {"lip_cert_d", r.lip_cert_d},
              {"lip_cert_g", r.lip_cert_g}};
}

struct Job {
  std::string label;  // sweep value, empty without a sweep
  GanConfig cfg;
  fs::path dir;
};

struct JobOutcome {
  MetricsRow medians;
  bool failed = false;
};

class TrainGanCommand : public Command {
 public:
  std::string name() const override { return "train-gan"; }
  std::string description() const override {
    return "Train a GAN on 2D synthetic data with Jacobian telemetry";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("--config", config_, "GAN config JSON (defaults for absent fields)")
        ->check(CLI::ExistingFile);
    sub.add_option("--sweep", sweep_, "key=v1,v2,... over a config field (dots for nesting)");
    sub.add_option("--seeds", seeds_, "Runs per setting, seeds base, base+1, ...")
        ->check(CLI::PositiveNumber);
    sub.add_option("--bound-m", bound_m_, "Sample size plugged into the run's GAN bound")
        ->check(CLI::PositiveNumber);
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    if (common_.out.empty()) throw InvalidParameter("train-gan needs --out <dir>");
    nlohmann::json base = config_.empty() ? nlohmann::json::object() : read_json_file(config_);
    GanConfig cfg0 = config_from_json(base);
    cfg0.seed = common_.resolved_seed(cfg0.seed);
    cfg0.validate();
    const auto base_doc = nlohmann::json::parse(to_json(cfg0).dump());

    std::string key;
    std::vector<std::string> values{""};
    if (!sweep_.empty()) {
      const auto eq = sweep_.find('=');
      if (eq == std::string::npos || eq == 0) throw InvalidParameter("--sweep expects key=v1,v2");
      key = sweep_.substr(0, eq);
      values = split(sweep_.substr(eq + 1), ',');
      if (values.empty()) throw InvalidParameter("--sweep has no values");
    }

    const OutputDir root(common_.out, common_.overwrite);
    const bool nested = !sweep_.empty() || seeds_ > 1;
    std::vector<Job> jobs;
    for (const auto& v : values) {
      auto doc = base_doc;
      if (!key.empty()) set_key(doc, key, sweep_value(v));
      for (int s = 0; s < seeds_; ++s) {
        Job job;
        job.label = v;
        job.cfg = config_from_json(doc);
        job.cfg.seed = cfg0.seed + static_cast<std::uint64_t>(s);
        job.cfg.validate();
        fs::path dir = root.path();
        if (!key.empty()) dir /= key + "=" + v;
        if (nested) dir /= "seed_" + std::to_string(job.cfg.seed);
        job.dir = dir;
        jobs.push_back(std::move(job));
      }
    }

    if (nested) {
      root.claim("sweep_summary.csv");
      root.claim("config.json");
    }
    for (const auto& job : jobs) {
      const OutputDir dir(job.dir, common_.overwrite);
      for (const char* name : {"metrics.csv", "summary.json", "config.json"}) dir.claim(name);
    }
    std::vector<JobOutcome> outcomes(jobs.size());
    parallel_for(jobs.size(), common_.threads,
                 [&](std::size_t j) { outcomes[j] = run_job(ctx, jobs[j]); });

    bool any_failed = false;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const auto& o = outcomes[j];
      any_failed = any_failed || o.failed;
      ctx.out << jobs[j].dir.lexically_relative(root.path()).generic_string() << " jac_d_x_fro "
              << fixed(o.medians.jac_d_x_fro, 4) << " jac_g_z_fro "
              << fixed(o.medians.jac_g_z_fro, 4) << " jac_v_z_fro "
              << fixed(o.medians.jac_v_z_fro, 4) << " energy " << fixed(o.medians.energy_distance, 4)
              << (o.failed ? " FAILED" : "") << "\n";
    }

    if (nested) {
      std::ostringstream csv;
      csv << "sweep_key,sweep_value,seed,jac_d_x_fro,jac_g_z_fro,jac_v_z_fro,energy_distance,"
             "lip_cert_d,lip_cert_g,failed\n";
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& m = outcomes[j].medians;
        csv << key << "," << jobs[j].label << "," << jobs[j].cfg.seed << "," << full(m.jac_d_x_fro)
            << "," << full(m.jac_g_z_fro) << "," << full(m.jac_v_z_fro) << ","
            << full(m.energy_distance) << "," << full(m.lip_cert_d) << "," << full(m.lip_cert_g)
            << "," << (outcomes[j].failed ? 1 : 0) << "\n";
      }
      root.write_text("sweep_summary.csv", csv.str());
      Json inputs;
      inputs["config"] = Json::parse(base_doc.dump());
      inputs["sweep"] = sweep_;
      inputs["seeds"] = seeds_;
      inputs["bound_m"] = bound_m_;
      root.write_json("config.json", config_echo(ctx, "train-gan", cfg0.seed, inputs));
    }
    return any_failed ? 2 : 0;
  }

 private:
  JobOutcome run_job(const Context& ctx, const Job& job) const {
    const OutputDir dir(job.dir, common_.overwrite);
    for (const char* name : {"metrics.csv", "checkpoint_d.json", "checkpoint_g.json",
                             "summary.json", "config.json"}) {
      dir.claim(name);
    }
    const auto result = train(job.cfg);
    JobOutcome outcome;
    outcome.failed = result.failure.has_value();
    if (!result.rows.empty()) outcome.medians = final_medians(result.rows);

    dir.write_text("metrics.csv", metrics_csv(result.rows));
    dir.write_json("checkpoint_d.json", nn::to_json(result.d.net));
    dir.write_json("checkpoint_g.json", nn::to_json(result.g));

    Json summary;
    summary["seed"] = job.cfg.seed;
    summary["steps"] = job.cfg.steps;
    summary["final_medians"] = row_json(outcome.medians);
    summary["clamp_rate"] = result.head_evaluations > 0
                                ? static_cast<double>(result.clamp_activations) /
                                      static_cast<double>(result.head_evaluations)
                                : 0.0;
    if (result.failure) {
      summary["failure"] = Json{{"step", result.failure->step},
                                {"quantity", result.failure->quantity}};
    } else {
      summary["failure"] = nullptr;
    }
    summary["lip_cert_d"] = discriminator_certificate(result.d);
    summary["lip_cert_g"] = generator_certificate(result.g);
    if (!result.failure) {
      try {
        const auto rb = gan_bound_for_run(job.cfg, result.d, result.g, bound_m_);
        summary["bound"] = Json{{"m", bound_m_},
                                {"value", rb.optimum.result.value},
                                {"confidence", rb.optimum.result.confidence},
                                {"lambda", rb.optimum.lambda},
                                {"lambda_x", rb.optimum.lambda_x},
                                {"L_d", rb.L_d},
                                {"L_g", rb.L_g}};
      } catch (const InvalidInput& e) {
        summary["bound"] = Json{{"m", bound_m_}, {"error", e.what()}};
      }
    }
    dir.write_json("summary.json", summary);

    Json inputs;
    inputs["config"] = Json::parse(to_json(job.cfg).dump());
    inputs["bound_m"] = bound_m_;
    dir.write_json("config.json", config_echo(ctx, "train-gan", job.cfg.seed, inputs));
    return outcome;
  }

  std::string config_;
  std::string sweep_;
  int seeds_ = 1;
  double bound_m_ = 1e4;
  CommonOptions common_;
};

}  // namespace

std::unique_ptr<Command> make_train_gan_command() { return std::make_unique<TrainGanCommand>(); }

}  // namespace lipcert::cli
