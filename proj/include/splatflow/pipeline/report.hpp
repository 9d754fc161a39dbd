#pragma once

#include <string>
#include <utility>
#include <vector>

namespace splatflow::pipeline {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Line chart with one polyline per series, axis ranges from the data.
std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label);

/// Reads a CSV with a header row; the first column is x, every other numeric
/// column becomes a series (rows whose x is not a number are skipped).
std::vector<Series> read_csv_series(const std::string& path, std::string* x_label = nullptr);

/// `git describe` of the build, or "unknown".
std::string git_describe();

}  // namespace splatflow::pipeline
