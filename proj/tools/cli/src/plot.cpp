#include "lipcert_cli/plot.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "lipcert/errors.hpp"

namespace lipcert::cli {

double map_x(double x, double lo, double hi, const PlotFrame& frame) {
  return frame.left + (x - lo) / (hi - lo) * (frame.right - frame.left);
}

double map_y(double y, double lo, double hi, const PlotFrame& frame) {
  return frame.bottom - (y - lo) / (hi - lo) * (frame.bottom - frame.top);
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidParameter("cannot read " + path.string());
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw InvalidParameter(path.string() + " has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line, ',');
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      row.push_back(end != cell.c_str() && *end == '\0' ? v
                                                        : std::numeric_limits<double>::quiet_NaN());
    }
    row.resize(t.header.size(), std::numeric_limits<double>::quiet_NaN());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::size_t column_index(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return i;
  }
  throw InvalidParameter("missing column: " + name);
}

std::pair<double, double> range_of(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

}  // namespace

std::string render_plot(const fs::path& csv, const std::vector<std::string>& columns,
                        const std::optional<std::string>& x_column) {
  if (columns.empty()) throw InvalidParameter("no columns to plot");
  const Table t = read_csv(csv);
  if (t.header.empty()) throw InvalidParameter(csv.string() + " has an empty header");
  const std::size_t xi = x_column ? column_index(t, *x_column) : 0;
  std::vector<std::size_t> ys;
  for (const auto& c : columns) ys.push_back(column_index(t, c));

  const double inf = std::numeric_limits<double>::infinity();
  double xlo = inf, xhi = -inf, ylo = inf, yhi = -inf;
  for (const auto& row : t.rows) {
    if (!std::isfinite(row[xi])) continue;
    for (std::size_t y : ys) {
      if (!std::isfinite(row[y])) continue;
      xlo = std::min(xlo, row[xi]);
      xhi = std::max(xhi, row[xi]);
      ylo = std::min(ylo, row[y]);
      yhi = std::max(yhi, row[y]);
    }
  }
  std::tie(xlo, xhi) = range_of(xlo, xhi);
  std::tie(ylo, yhi) = range_of(ylo, yhi);

  const PlotFrame f;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << coord(f.left) << "\" y1=\"" << coord(f.bottom) << "\" x2=\""
      << coord(f.right) << "\" y2=\"" << coord(f.bottom) << "\"/>\n";
  svg << "<line x1=\"" << coord(f.left) << "\" y1=\"" << coord(f.bottom) << "\" x2=\""
      << coord(f.left) << "\" y2=\"" << coord(f.top) << "\"/>\n";
  svg << "</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  svg << "<text x=\"" << coord(f.left) << "\" y=\"" << coord(f.bottom + 16)
      << "\" text-anchor=\"middle\">" << label(xlo) << "</text>\n";
  svg << "<text x=\"" << coord(f.right) << "\" y=\"" << coord(f.bottom + 16)
      << "\" text-anchor=\"middle\">" << label(xhi) << "</text>\n";
  svg << "<text x=\"" << coord(f.left - 4) << "\" y=\"" << coord(f.bottom)
      << "\" text-anchor=\"end\">" << label(ylo) << "</text>\n";
  svg << "<text x=\"" << coord(f.left - 4) << "\" y=\"" << coord(f.top + 4)
      << "\" text-anchor=\"end\">" << label(yhi) << "</text>\n";
  svg << "<text x=\"" << coord((f.left + f.right) / 2) << "\" y=\"" << coord(f.bottom + 32)
      << "\" text-anchor=\"middle\">" << escape(t.header[xi]) << "</text>\n";
  svg << "</g>\n";

  for (std::size_t s = 0; s < ys.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    std::string points;
    for (const auto& row : t.rows) {
      const double x = row[xi];
      const double y = row[ys[s]];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!points.empty()) points += ' ';
      points += coord(map_x(x, xlo, xhi, f)) + "," + coord(map_y(y, ylo, yhi, f));
    }
    if (!points.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
          << points << "\"/>\n";
    }
    svg << "<text x=\"" << coord(f.right - 4) << "\" y=\"" << coord(f.top + 14 * (s + 1))
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color
        << "\">" << escape(columns[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const fs::path& csv, const std::vector<std::string>& columns, const fs::path& svg,
               const std::optional<std::string>& x_column) {
  write_file(svg, render_plot(csv, columns, x_column), true);
}

namespace {

class PlotCommand : public Command {
 public:
  std::string name() const override { return "plot"; }
  std::string description() const override { return "Render CSV columns as an SVG line chart"; }

  void setup(CLI::App& sub) override {
    sub.add_option("--csv", csv_, "Input CSV")->required()->check(CLI::ExistingFile);
    sub.add_option("--columns", columns_, "Comma-separated columns to draw")->required();
    sub.add_option("--x", x_, "Column for the horizontal axis (first column by default)");
    sub.add_option("--out", out_, "Output SVG path")->required();
    sub.add_flag("--overwrite", overwrite_, "Replace an existing SVG");
  }

  int run(const Context& ctx) override {
    std::optional<std::string> x;
    if (!x_.empty()) x = x_;
    const auto text = render_plot(csv_, split(columns_, ','), x);
    write_file(out_, text, overwrite_);
    ctx.out << out_ << "\n";
    return 0;
  }

 private:
  std::string csv_;
  std::string columns_;
  std::string x_;
  std::string out_;
  bool overwrite_ = false;
};

}  // namespace

std::unique_ptr<Command> make_plot_command() { return std::make_unique<PlotCommand>(); }

}  // namespace lipcert::cli
