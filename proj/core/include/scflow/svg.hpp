#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace scflow::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static line chart with axes, tick labels and a legend.
std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

/// Scatter of 2-D points coloured by integer group.
std::string scatter_plot(const std::string& title, const Eigen::MatrixXd& xy, const std::vector<int>& groups);

}  // namespace scflow::svg
