#include <ostream>
#include <sstream>

#include "common.hpp"
#include "lipcert/errors.hpp"
#include "lipcert/robustness.hpp"

namespace lipcert::cli {
namespace {

using namespace lipcert::robustness;

class RobustnessCommand : public Command {
 public:
  std::string name() const override { return "robustness"; }
  std::string description() const override {
    return "Bound-violation trials on a linear task over a cube";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("--weights", weights_, "Comma-separated loss weights (sets the dimension)");
    sub.add_option("--lo", lo_, "Lower corner of the input cube");
    sub.add_option("--hi", hi_, "Upper corner of the input cube");
    sub.add_option("--m", m_, "Training sample size")->check(CLI::PositiveNumber);
    sub.add_option("--delta", delta_, "Confidence parameter");
    sub.add_option("--lambda", lambda_, "Cell edge");
    sub.add_option("--trials", trials_, "Number of trials")->check(CLI::PositiveNumber);
    sub.add_option("--probes", probes_, "Probes per occupied cell")->check(CLI::NonNegativeNumber);
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    if (common_.out.empty()) throw InvalidParameter("robustness needs --out <dir>");
    const std::uint64_t seed = common_.resolved_seed();
    const auto w = parse_doubles(weights_, "--weights");
    const VectorXd wv = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    if (!(lo_ < hi_)) throw InvalidParameter("--lo must be below --hi");
    const auto task = linear_task(wv, Box::cube(wv.size(), lo_, hi_), m_);

    TrialOptions opts;
    opts.delta = delta_;
    opts.lambda = lambda_;
    opts.probes_per_cell = probes_;
    opts.threads = common_.threads;
    const OutputDir dir(common_.out, common_.overwrite);
    for (const char* name : {"trials.csv", "summary.json", "config.json"}) dir.claim(name);
    const auto summary = violation_trial(task, opts, trials_, seed);

    std::ostringstream csv;
    csv << "trial,m,lambda,gap,bound,violated\n";
    for (const auto& r : summary.rows) {
      csv << r.trial << "," << r.m << "," << full(r.lambda) << "," << full(r.gap) << ","
          << full(r.bound) << "," << (r.violated ? 1 : 0) << "\n";
    }
    double max_eps = 0.0;
    for (const auto& r : summary.rows) max_eps = std::max(max_eps, r.epsilon_hat);

    Json doc;
    doc["trials"] = summary.trials;
    doc["violations"] = summary.violations;
    doc["violation_rate"] = summary.rate();
    doc["envelope"] = binomial_envelope(delta_, trials_);
    doc["epsilon_violations"] = summary.epsilon_violations;
    doc["max_epsilon_hat"] = max_eps;
    doc["epsilon_cap"] = task.L_inf * lambda_;
    doc["L_inf"] = task.L_inf;
    doc["C"] = task.C;
    doc["seed"] = seed;

    dir.write_text("trials.csv", csv.str());
    dir.write_json("summary.json", doc);
    Json inputs;
    inputs["weights"] = w;
    inputs["lo"] = lo_;
    inputs["hi"] = hi_;
    inputs["m"] = m_;
    inputs["delta"] = delta_;
    inputs["lambda"] = lambda_;
    inputs["trials"] = trials_;
    inputs["probes"] = probes_;
    dir.write_json("config.json", config_echo(ctx, "robustness", seed, inputs));

    ctx.out << "violations " << summary.violations << "/" << summary.trials << " (rate "
            << fixed(summary.rate(), 4) << ", envelope " << fixed(binomial_envelope(delta_, trials_), 4)
            << ")\n";
    ctx.out << "epsilon_violations " << summary.epsilon_violations << "\n";
    return 0;
  }

 private:
  std::string weights_ = "1,1";
  double lo_ = 0.0;
  double hi_ = 1.0;
  int m_ = 1000;
  double delta_ = 0.1;
  double lambda_ = 0.1;
  int trials_ = 200;
  int probes_ = 64;
  CommonOptions common_;
};

}  // namespace

std::unique_ptr<Command> make_robustness_command() {
  return std::make_unique<RobustnessCommand>();
}

}  // namespace lipcert::cli
