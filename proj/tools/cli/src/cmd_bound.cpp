#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "lipcert/bounds.hpp"
#include "lipcert/errors.hpp"

namespace lipcert::cli {
namespace {

using namespace lipcert::bounds;

const std::vector<std::string> kKinds{
    "thm1_part1",      "thm1_part2",      "min_depth",           "thm4",
    "consistency_general", "consistency_dropout", "gan_general", "gan_sn",
    "gan_dropout",     "gan_joint",       "gan_consistency_general", "gan_consistency_sn",
    "gan_consistency_dropout"};

void reject_unknown(const nlohmann::json& doc, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!doc.is_object()) throw InvalidParameter(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw InvalidParameter(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& doc, const char* key, T& field) {
  if (doc.contains(key)) field = doc.at(key).get<T>();
}

LogBase parse_log_base(const nlohmann::json& doc) {
  if (!doc.contains("log_base")) return LogBase::Natural;
  const auto& v = doc.at("log_base");
  const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s == "e" || s == "natural") return LogBase::Natural;
  if (s == "2") return LogBase::Two;
  if (s == "10") return LogBase::Ten;
  throw InvalidParameter("log_base must be \"e\", 2 or 10");
}

Thm1Params thm1_params(const nlohmann::json& doc) {
  reject_unknown(doc, {"L", "C", "B", "n", "m", "delta", "lambda", "alpha", "log_base", "eps_o"},
                 "params");
  Thm1Params p;
  read(doc, "L", p.L);
  read(doc, "C", p.C);
  read(doc, "B", p.B);
  read(doc, "n", p.n);
  read(doc, "m", p.m);
  read(doc, "delta", p.delta);
  read(doc, "lambda", p.lambda);
  read(doc, "alpha", p.alpha);
  p.log_base = parse_log_base(doc);
  return p;
}

FastRateParams fast_params(const nlohmann::json& doc, FastFamily family) {
  reject_unknown(doc,
                 {"family", "C_family", "L_f", "B", "C", "n", "m", "delta", "nu", "K", "rate",
                  "sn_layer_product", "log_base", "eps_o"},
                 "params");
  FastRateParams p;
  p.family = family;
  if (doc.contains("family")) {
    const auto f = doc.at("family").get<std::string>();
    if (f == "dropout") {
      p.family = FastFamily::Dropout;
    } else if (f == "sn") {
      p.family = FastFamily::SpectralNorm;
    } else {
      throw InvalidParameter("family must be \"dropout\" or \"sn\"");
    }
  }
  read(doc, "C_family", p.C_family);
  read(doc, "L_f", p.L_f);
  read(doc, "B", p.B);
  read(doc, "C", p.C);
  read(doc, "n", p.n);
  read(doc, "m", p.m);
  read(doc, "delta", p.delta);
  read(doc, "nu", p.nu);
  read(doc, "K", p.K);
  read(doc, "rate", p.rate);
  if (doc.contains("sn_layer_product")) p.sn_layer_product = doc.at("sn_layer_product").get<double>();
  p.log_base = parse_log_base(doc);
  return p;
}

GanBoundParams gan_params(const nlohmann::json& doc) {
  reject_unknown(doc,
                 {"L_psi", "L_d", "L_g", "C", "B_x", "B_z", "n_x", "n", "m", "delta", "delta_x",
                  "lambda", "lambda_x", "eps_o", "log_base", "fast"},
                 "params");
  GanBoundParams p;
  read(doc, "L_psi", p.L_psi);
  read(doc, "L_d", p.L_d);
  read(doc, "L_g", p.L_g);
  read(doc, "C", p.C);
  read(doc, "B_x", p.B_x);
  read(doc, "B_z", p.B_z);
  read(doc, "n_x", p.n_x);
  read(doc, "n", p.n);
  read(doc, "m", p.m);
  read(doc, "delta", p.delta);
  read(doc, "delta_x", p.delta_x);
  read(doc, "lambda", p.lambda);
  read(doc, "lambda_x", p.lambda_x);
  read(doc, "eps_o", p.eps_o);
  p.log_base = parse_log_base(doc);
  return p;
}

double eps_o_of(const nlohmann::json& doc) {
  return doc.contains("eps_o") ? doc.at("eps_o").get<double>() : 0.0;
}

struct Evaluation {
  BoundResult result;
  Json extra = Json::object();
};

Evaluation evaluate(const std::string& kind, const nlohmann::json& doc, bool optimize) {
  if (optimize && kind != "thm1_part1" && kind != "gan_general") {
    throw InvalidParameter("--optimize-lambda applies to thm1_part1 and gan_general only");
  }
  Evaluation ev;
  if (kind == "thm1_part1") {
    auto p = thm1_params(doc);
    if (optimize) {
      const auto opt = optimize_lambda_thm1(p);
      ev.result = opt.result;
      ev.extra["lambda"] = opt.lambda;
    } else {
      ev.result = thm1_part1(p);
    }
  } else if (kind == "thm1_part2") {
    ev.result = thm1_part2(thm1_params(doc));
  } else if (kind == "min_depth") {
    reject_unknown(doc, {"rate", "m"}, "params");
    const int k = min_depth(doc.at("rate").get<double>(), doc.at("m").get<double>());
    ev.result.value = k;
    ev.result.confidence = 1.0;
  } else if (kind == "thm4") {
    ev.result = thm4_bound(fast_params(doc, FastFamily::Dropout));
  } else if (kind == "consistency_general") {
    const auto p = thm1_params(doc);
    ev.result = consistency_bound(ConsistencyKind::General, eps_o_of(doc), &p, nullptr);
  } else if (kind == "consistency_dropout") {
    const auto f = fast_params(doc, FastFamily::Dropout);
    ev.result = consistency_bound(ConsistencyKind::Dropout, eps_o_of(doc), nullptr, &f);
  } else {
    const auto p = gan_params(doc);
    std::optional<FastRateParams> fast;
    if (doc.contains("fast")) fast = fast_params(doc.at("fast"), FastFamily::Dropout);
    const FastRateParams* fp = fast ? &*fast : nullptr;
    const bool needs_fast = kind == "gan_sn" || kind == "gan_dropout" ||
                            kind == "gan_consistency_sn" || kind == "gan_consistency_dropout";
    if (needs_fast && !fp) throw InvalidParameter(kind + " needs a \"fast\" parameter object");
    if (kind == "gan_general") {
      if (optimize) {
        const auto opt = optimize_gan_lambdas(p);
        ev.result = opt.result;
        ev.extra["lambda"] = opt.lambda;
        ev.extra["lambda_x"] = opt.lambda_x;
      } else {
        ev.result = gan_bound(GanKind::General, p);
      }
    } else if (kind == "gan_sn") {
      ev.result = gan_bound(GanKind::SpectralNorm, p, fp);
    } else if (kind == "gan_dropout") {
      ev.result = gan_bound(GanKind::Dropout, p, fp);
    } else if (kind == "gan_joint") {
      ev.result = gan_joint_error_bound(p);
    } else if (kind == "gan_consistency_general") {
      ev.result = gan_consistency_bound(GanKind::General, p);
    } else if (kind == "gan_consistency_sn") {
      ev.result = gan_consistency_bound(GanKind::SpectralNorm, p, fp);
    } else if (kind == "gan_consistency_dropout") {
      ev.result = gan_consistency_bound(GanKind::Dropout, p, fp);
    } else {
      throw InvalidParameter("unknown bound '" + kind + "'");
    }
  }
  return ev;
}

Json result_json(const std::string& kind, const Evaluation& ev, std::uint64_t seed) {
  Json doc;
  doc["bound"] = kind;
  doc["value"] = ev.result.value;
  doc["confidence"] = ev.result.confidence;
  Json terms = Json::array();
  for (const auto& t : ev.result.terms) terms.push_back(Json{{"name", t.name}, {"value", t.value}});
  doc["terms"] = terms;
  for (const auto& [k, v] : ev.extra.items()) doc[k] = v;
  doc["seed"] = seed;
  return doc;
}

/// Sets a possibly dotted key ("fast.K") in a params document, keeping
/// integers integral.
void set_param(nlohmann::json& doc, const std::string& key, double value) {
  nlohmann::json* node = &doc;
  const auto parts = split(key, '.');
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  auto& slot = (*node)[parts.back()];
  if ((slot.is_number_integer() || parts.back() == "n" || parts.back() == "n_x" ||
       parts.back() == "K") &&
      value == static_cast<double>(static_cast<long long>(value))) {
    slot = static_cast<long long>(value);
  } else {
    slot = value;
  }
}

class BoundCommand : public Command {
 public:
  std::string name() const override { return "bound"; }
  std::string description() const override {
    return "Evaluate a generalization, consistency or GAN bound";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("kind", kind_, "Bound to evaluate")
        ->required()
        ->check(CLI::IsMember(kKinds));
    sub.add_option("--params", params_, "Parameter JSON file")->required()->check(CLI::ExistingFile);
    sub.add_flag("--optimize-lambda", optimize_, "Minimize over the cell edge(s)");
    sub.add_option("--sweep", sweep_, "key=v1,v2,... evaluates the bound at each value");
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    const auto doc = read_json_file(params_);
    const std::uint64_t seed = common_.resolved_seed();
    Json inputs;
    inputs["kind"] = kind_;
    inputs["params"] = Json::parse(doc.dump());
    inputs["optimize_lambda"] = optimize_;
    if (!sweep_.empty()) inputs["sweep"] = sweep_;

    if (sweep_.empty()) {
      const auto ev = evaluate(kind_, doc, optimize_);
      const auto [target, in_dir] = target_path("result.json");
      auto doc_out = result_json(kind_, ev, seed);
      const auto echo = config_echo(ctx, "bound", seed, inputs);
      ensure_free({target, target.parent_path() / "config.json"}, in_dir);
      if (in_dir) {
        write_file(target.parent_path() / "config.json", dump(echo), common_.overwrite);
      } else {
        doc_out["config"] = echo;
      }
      write_file(target, dump(doc_out), common_.overwrite);
      ctx.out << (kind_ == "min_depth" ? std::to_string(static_cast<int>(ev.result.value))
                                       : fixed(ev.result.value, 6))
              << "\n";
      ctx.out << "confidence " << fixed(ev.result.confidence, 6) << "\n";
      for (const auto& t : ev.result.terms) ctx.out << t.name << " " << full(t.value) << "\n";
      for (const auto& [k, v] : ev.extra.items()) ctx.out << k << " " << full(v.get<double>()) << "\n";
      return 0;
    }

    const auto eq = sweep_.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidParameter("--sweep expects key=v1,v2,...");
    const std::string key = sweep_.substr(0, eq);
    const auto values = parse_doubles(sweep_.substr(eq + 1), "--sweep");

    std::vector<std::string> term_names;
    std::ostringstream csv;
    std::vector<std::string> lines;
    for (double v : values) {
      auto varied = doc;
      set_param(varied, key, v);
      const auto ev = evaluate(kind_, varied, optimize_);
      if (term_names.empty()) {
        for (const auto& t : ev.result.terms) term_names.push_back(t.name);
      }
      std::string line = key + "," + full(v) + "," + full(ev.result.value) + "," +
                         full(ev.result.confidence);
      for (const auto& t : ev.result.terms) line += "," + full(t.value);
      lines.push_back(line);
      ctx.out << key << "=" << full(v) << " " << fixed(ev.result.value, 6) << "\n";
    }
    csv << "swept_param,value,bound,confidence";
    for (std::size_t i = 0; i < term_names.size(); ++i) csv << ",term_" << i + 1;
    csv << "\n";
    for (const auto& line : lines) csv << line << "\n";

    const auto [target, in_dir] = target_path("sweep.csv");
    inputs["term_names"] = term_names;
    const fs::path echo_path =
        in_dir ? target.parent_path() / "config.json"
               : target.parent_path() / (target.stem().string() + ".config.json");
    ensure_free({target, echo_path}, true);
    write_file(echo_path, dump(config_echo(ctx, "bound", seed, inputs)), common_.overwrite);
    write_file(target, csv.str(), common_.overwrite);
    return 0;
  }

 private:
  /// The artifact path, and whether --out named a directory (which then
  /// also receives config.json).
  std::pair<fs::path, bool> target_path(const std::string& default_name) const {
    fs::path p = common_.out.empty() ? fs::path(default_name) : fs::path(common_.out);
    const bool in_dir =
        fs::is_directory(p) || (!common_.out.empty() && common_.out.back() == '/');
    if (in_dir) p /= default_name;
    if (!p.has_parent_path()) p = fs::path(".") / p;
    return {p, in_dir};
  }

  void ensure_free(const std::vector<fs::path>& paths, bool all) const {
    if (common_.overwrite) return;
    for (std::size_t i = 0; i < (all ? paths.size() : 1); ++i) {
      if (fs::exists(paths[i])) {
        throw InvalidParameter(paths[i].string() + " already exists (pass --overwrite to replace it)");
      }
    }
  }

  std::string kind_;
  std::string params_;
  bool optimize_ = false;
  std::string sweep_;
  CommonOptions common_;
};

}  // namespace

std::unique_ptr<Command> make_bound_command() { return std::make_unique<BoundCommand>(); }

}  // namespace lipcert::cli
