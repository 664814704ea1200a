#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fcid::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with a shared linear axis pair and a legend.
void write_line_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series);

/// Vertical bar chart, one bar per label.
void write_bar_chart(const std::filesystem::path& path, const std::string& title, const std::vector<std::string>& labels,
                     const std::vector<double>& values);

}  // namespace fcid::svg
