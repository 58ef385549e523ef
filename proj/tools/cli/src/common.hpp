#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"

namespace lipcert::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Options every subcommand understands.
struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  bool overwrite = false;
  int threads = 1;
  CLI::Option* seed_option = nullptr;

  /// --seed when given, else LIPCERT_SEED, else `fallback`.
  std::uint64_t resolved_seed(std::uint64_t fallback = 0) const;
  bool seed_given() const;
};

void add_common_options(CLI::App& app, CommonOptions& opts, bool with_out = true);

/// Streams and the original argument list, shared by every command.
struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
};

/// A directory the command owns. Files are created on demand; an existing
/// file is only replaced with --overwrite.
class OutputDir {
 public:
  OutputDir(const fs::path& dir, bool overwrite);

  const fs::path& path() const { return dir_; }
  fs::path claim(const std::string& name) const;
  void write_text(const std::string& name, const std::string& text) const;
  void write_json(const std::string& name, const Json& doc) const;
  OutputDir subdir(const std::string& name) const;

 private:
  fs::path dir_;
  bool overwrite_;
};

void write_file(const fs::path& path, const std::string& text, bool overwrite);
std::string dump(const Json& doc);

nlohmann::json read_json_file(const std::string& path);

/// Echo of the invocation: command, arguments, seed, version and inputs.
Json config_echo(const Context& ctx, const std::string& command, std::uint64_t seed,
                 const Json& inputs);

std::vector<double> parse_doubles(const std::string& list, const std::string& what);
std::vector<std::string> split(const std::string& s, char sep);
std::string fixed(double v, int decimals);
std::string full(double v);

/// A subcommand: registers its options, then runs once parsing succeeded.
class Command {
 public:
  virtual ~Command() = default;
  virtual std::string name() const = 0;
  virtual std::string description() const = 0;
  virtual void setup(CLI::App& sub) = 0;
  virtual int run(const Context& ctx) = 0;
};

std::unique_ptr<Command> make_bound_command();
std::unique_ptr<Command> make_certify_command();
std::unique_ptr<Command> make_robustness_command();
std::unique_ptr<Command> make_train_gan_command();
std::unique_ptr<Command> make_da_verify_command();
std::unique_ptr<Command> make_da_experiment_command();
std::unique_ptr<Command> make_plot_command();

}  // namespace lipcert::cli
