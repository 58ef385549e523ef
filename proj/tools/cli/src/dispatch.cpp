#include <exception>
#include <iostream>

#include "common.hpp"
#include "lipcert/errors.hpp"
#include "lipcert_cli/cli.hpp"

namespace lipcert::cli {

std::string version() { return LIPCERT_VERSION; }

namespace {

const CLI::App* failing_app(const CLI::App& app) {
  for (const auto* sub : app.get_subcommands()) return failing_app(*sub);
  return &app;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lipschitz certificates, generalization bounds and GAN experiments", "lipcert"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(make_certify_command());
  commands.push_back(make_bound_command());
  commands.push_back(make_robustness_command());
  commands.push_back(make_train_gan_command());
  commands.push_back(make_da_verify_command());
  commands.push_back(make_da_experiment_command());
  commands.push_back(make_plot_command());

  std::vector<CLI::App*> subs;
  for (auto& cmd : commands) {
    subs.push_back(app.add_subcommand(cmd->name(), cmd->description()));
    cmd->setup(*subs.back());
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("lipcert");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << failing_app(app)->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << failing_app(app)->help();
    return 1;
  }

  const Context ctx{args, out, err};
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      return commands[i]->run(ctx);
    } catch (const InvalidInput& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const NumericFailure& e) {
      err << "numeric failure: " << e.what() << "\n";
      return 2;
    } catch (const nlohmann::json::exception& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

int dispatch(int argc, char** argv) {
  return dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace lipcert::cli
