#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lipcert::cli {

struct PlotFrame {
  double left = 60.0;
  double right = 620.0;
  double top = 20.0;
  double bottom = 360.0;
};

/// Pixel coordinate of a data value on an axis spanning [lo, hi].
double map_x(double x, double lo, double hi, const PlotFrame& frame = {});
double map_y(double y, double lo, double hi, const PlotFrame& frame = {});

/// Renders the named CSV columns against x_column (the first column when
/// absent) as a 640 x 400 SVG line chart. Throws InvalidParameter naming any
/// missing column.
std::string render_plot(const std::filesystem::path& csv, const std::vector<std::string>& columns,
                        const std::optional<std::string>& x_column = std::nullopt);

void emit_plot(const std::filesystem::path& csv, const std::vector<std::string>& columns,
               const std::filesystem::path& svg,
               const std::optional<std::string>& x_column = std::nullopt);

}  // namespace lipcert::cli
