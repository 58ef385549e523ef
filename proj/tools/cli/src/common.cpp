#include "common.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lipcert/errors.hpp"
#include "lipcert_cli/cli.hpp"

namespace lipcert::cli {

std::uint64_t CommonOptions::resolved_seed(std::uint64_t fallback) const {
  if (seed_given()) return seed;
  if (const char* env = std::getenv("LIPCERT_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0' || *env == '-') {
      throw InvalidParameter("LIPCERT_SEED is not an unsigned 64-bit integer: " +
                             std::string(env));
    }
    return static_cast<std::uint64_t>(v);
  }
  return fallback;
}

bool CommonOptions::seed_given() const { return seed_option != nullptr && seed_option->count() > 0; }

void add_common_options(CLI::App& app, CommonOptions& opts, bool with_out) {
  opts.seed_option =
      app.add_option("--seed", opts.seed, "Top-level seed (LIPCERT_SEED when absent)");
  if (with_out) app.add_option("--out", opts.out, "Output location");
  app.add_flag("--overwrite", opts.overwrite, "Replace existing artifacts");
  app.add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
}

OutputDir::OutputDir(const fs::path& dir, bool overwrite) : dir_(dir), overwrite_(overwrite) {
  std::error_code ec;
  if (fs::exists(dir_, ec) && !fs::is_directory(dir_, ec)) {
    throw InvalidParameter("output path exists and is not a directory: " + dir_.string());
  }
  fs::create_directories(dir_, ec);
  if (ec) throw InvalidParameter("cannot create " + dir_.string() + ": " + ec.message());
}

fs::path OutputDir::claim(const std::string& name) const {
  const fs::path p = dir_ / name;
  if (fs::exists(p) && !overwrite_) {
    throw InvalidParameter(p.string() + " already exists (pass --overwrite to replace it)");
  }
  return p;
}

void OutputDir::write_text(const std::string& name, const std::string& text) const {
  write_file(dir_ / name, text, overwrite_);
}

void OutputDir::write_json(const std::string& name, const Json& doc) const {
  write_text(name, dump(doc));
}

OutputDir OutputDir::subdir(const std::string& name) const {
  return OutputDir(dir_ / name, overwrite_);
}

void write_file(const fs::path& path, const std::string& text, bool overwrite) {
  if (fs::exists(path) && !overwrite) {
    throw InvalidParameter(path.string() + " already exists (pass --overwrite to replace it)");
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw InvalidParameter("cannot create " + path.parent_path().string());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidParameter("cannot write " + path.string());
  os << text;
  if (!os) throw NumericFailure("write failed: " + path.string());
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidParameter("cannot read " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidParameter(path + ": " + e.what());
  }
}

Json config_echo(const Context& ctx, const std::string& command, std::uint64_t seed,
                 const Json& inputs) {
  Json doc;
  doc["command"] = command;
  doc["args"] = ctx.args;
  doc["seed"] = seed;
  doc["version"] = version();
  doc["inputs"] = inputs;
  return doc;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::vector<double> parse_doubles(const std::string& list, const std::string& what) {
  std::vector<double> values;
  for (const auto& item : split(list, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) {
      throw InvalidParameter(what + ": not a number: '" + item + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw InvalidParameter(what + ": empty list");
  return values;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace lipcert::cli
