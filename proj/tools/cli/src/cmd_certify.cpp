#include <ostream>

#include "common.hpp"
#include "lipcert/errors.hpp"
#include "lipcert/lipschitz.hpp"
#include "lipcert/nn.hpp"

namespace lipcert::cli {
namespace {

using namespace lipcert::lipschitz;

std::vector<double> expand_caps(const std::string& list, std::size_t depth) {
  auto caps = parse_doubles(list, "--caps");
  if (caps.size() == 1) caps.assign(depth, caps.front());
  if (caps.size() != depth) {
    throw InvalidParameter("--caps needs one value or one per layer (" + std::to_string(depth) +
                           ")");
  }
  return caps;
}

class CertifyCommand : public Command {
 public:
  std::string name() const override { return "certify"; }
  std::string description() const override {
    return "Lipschitz certificate of a serialized network";
  }

  void setup(CLI::App& sub) override {
    sub.add_option("--net", net_, "Network JSON")->required()->check(CLI::ExistingFile);
    sub.add_option("--method", method_, "spectral, dropout or declared")
        ->check(CLI::IsMember({"spectral", "dropout", "declared"}));
    sub.add_option("--caps", caps_, "Per-layer caps (one value broadcasts)");
    sub.add_option("--keep-rate", keep_rate_, "Dropout keep rate q");
    sub.add_option("--pairs", pairs_, "Sampled pairs for the empirical lower bound")
        ->check(CLI::NonNegativeNumber);
    sub.add_option("--metric", metric_, "Input metric: l2 or linf")
        ->check(CLI::IsMember({"l2", "linf"}));
    sub.add_option("--domain-lo", lo_, "Lower corner of the sampling cube");
    sub.add_option("--domain-hi", hi_, "Upper corner of the sampling cube");
    add_common_options(sub, common_);
  }

  int run(const Context& ctx) override {
    const auto net = nn::mlp_from_json(read_json_file(net_));
    const std::uint64_t seed = common_.resolved_seed();
    if (!(lo_ < hi_)) throw InvalidParameter("--domain-lo must be below --domain-hi");

    CertifyOptions opts;
    Method method = Method::SpectralProduct;
    if (method_ == "dropout") {
      method = Method::DropoutProduct;
      opts.keep_rate = keep_rate_;
      opts.frobenius_caps = expand_caps(caps_.empty() ? "1" : caps_, net.depth());
    } else if (method_ == "declared") {
      if (caps_.empty()) throw InvalidParameter("--method declared needs --caps");
      method = Method::DeclaredCaps;
      opts.spectral_caps = expand_caps(caps_, net.depth());
    }
    std::optional<OutputDir> dir;
    if (!common_.out.empty()) {
      dir.emplace(common_.out, common_.overwrite);
      dir->claim("certificate.json");
      dir->claim("config.json");
    }
    const auto cert = certify(net, method, opts);

    const Metric metric = metric_ == "linf" ? Metric::Linf : Metric::L2;
    double bound = cert.bound;
    Json conversion;
    if (metric == Metric::Linf) {
      const auto conv = to_linf_input(cert.bound, net.input_dim());
      bound = conv.linf;
      conversion = Json{{"l2", conv.l2}, {"factor", conv.factor}, {"note", conv.note}};
    }

    double lower = 0.0;
    if (pairs_ > 0) {
      Rng rng(seed, "certify");
      lower = empirical_lipschitz_lower_bound(net, Box::cube(net.input_dim(), lo_, hi_), pairs_,
                                              metric, rng);
    }

    Json doc;
    doc["method"] = method_;
    doc["bound"] = bound;
    Json layers = Json::array();
    for (const auto& f : cert.per_layer) {
      layers.push_back(Json{{"rho", f.rho}, {"norm", f.norm}, {"factor", f.factor}});
    }
    doc["per_layer"] = layers;
    doc["empirical_lower_bound"] = lower;
    doc["metric"] = metric_;
    if (!conversion.is_null()) doc["conversion"] = conversion;
    doc["pairs"] = pairs_;
    doc["seed"] = seed;

    ctx.out << full(bound) << "\n";
    ctx.out << "empirical_lower_bound " << full(lower) << "\n";
    for (std::size_t k = 0; k < cert.per_layer.size(); ++k) {
      const auto& f = cert.per_layer[k];
      ctx.out << "layer " << k << " rho " << full(f.rho) << " norm " << full(f.norm) << " factor "
              << full(f.factor) << "\n";
    }

    if (dir) {
      dir->write_json("certificate.json", doc);
      Json inputs;
      inputs["net"] = Json::parse(read_json_file(net_).dump());
      inputs["method"] = method_;
      inputs["caps"] = caps_;
      inputs["keep_rate"] = keep_rate_;
      inputs["pairs"] = pairs_;
      inputs["metric"] = metric_;
      inputs["domain"] = {lo_, hi_};
      dir->write_json("config.json", config_echo(ctx, "certify", seed, inputs));
    }
    return 0;
  }

 private:
  std::string net_;
  std::string method_ = "spectral";
  std::string caps_;
  double keep_rate_ = 0.5;
  int pairs_ = 2000;
  std::string metric_ = "l2";
  double lo_ = -1.0;
  double hi_ = 1.0;
  CommonOptions common_;
};

}  // namespace

std::unique_ptr<Command> make_certify_command() { return std::make_unique<CertifyCommand>(); }

}  // namespace lipcert::cli
