#pragma once

#include <string>

#include <Eigen/Dense>

namespace redcliff {

/// Static heatmap of a nonnegative score matrix, normalized by its max entry.
/// Cell labels use 3 significant digits; output bytes are deterministic.
std::string heatmap_svg(const Eigen::MatrixXd& m, const std::string& title);

/// Two-color diverging heatmap centered at 0 for factor-difference plots.
std::string diff_heatmap_svg(const Eigen::MatrixXd& m, const std::string& title);

}  // namespace redcliff
