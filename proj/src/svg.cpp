#include "redcliff/svg.hpp"

#include <cmath>
#include <cstdio>

namespace redcliff {

namespace {

constexpr int kCell = 28;
constexpr int kMargin = 34;
constexpr int kTitle = 22;

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string rgb(double r, double g, double b) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)", static_cast<int>(std::lround(r)),
                static_cast<int>(std::lround(g)), static_cast<int>(std::lround(b)));
  return buf;
}

std::string svg_header(Eigen::Index rows, Eigen::Index cols, const std::string& title) {
  const long w = kMargin + kCell * cols + 8;
  const long h = kTitle + kMargin + kCell * rows + 8;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                  "\" height=\"" + std::to_string(h) + "\">\n";
  s += "<text x=\"4\" y=\"15\" font-family=\"sans-serif\" font-size=\"13\">" + title + "</text>\n";
  for (Eigen::Index j = 0; j < cols; ++j)
    s += "<text x=\"" + std::to_string(kMargin + kCell * j + kCell / 2) + "\" y=\"" +
         std::to_string(kTitle + kMargin - 8) +
         "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" +
         std::to_string(j) + "</text>\n";
  for (Eigen::Index i = 0; i < rows; ++i)
    s += "<text x=\"" + std::to_string(kMargin - 8) + "\" y=\"" +
         std::to_string(kTitle + kMargin + kCell * i + kCell / 2 + 4) +
         "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + std::to_string(i) +
         "</text>\n";
  return s;
}

std::string cell(Eigen::Index i, Eigen::Index j, const std::string& fill, const std::string& label,
                 bool dark) {
  const long x = kMargin + kCell * j;
  const long y = kTitle + kMargin + kCell * i;
  std::string s = "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                  std::to_string(kCell) + "\" height=\"" + std::to_string(kCell) + "\" fill=\"" +
                  fill + "\" stroke=\"#999\"/>\n";
  s += "<text x=\"" + std::to_string(x + kCell / 2) + "\" y=\"" + std::to_string(y + kCell / 2 + 3) +
       "\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"middle\" fill=\"" +
       (dark ? std::string("#fff") : std::string("#333")) + "\">" + label + "</text>\n";
  return s;
}

}  // namespace

std::string heatmap_svg(const Eigen::MatrixXd& m, const std::string& title) {
  const double mx = m.size() > 0 ? m.maxCoeff() : 0.0;
  std::string s = svg_header(m.rows(), m.cols(), title);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double t = mx > 0.0 ? m(i, j) / mx : 0.0;
      // white -> dark blue
      const std::string fill = rgb(255.0 + (31.0 - 255.0) * t, 255.0 + (78.0 - 255.0) * t,
                                   255.0 + (140.0 - 255.0) * t);
      s += cell(i, j, fill, fmt3(m(i, j)), t > 0.55);
    }
  return s + "</svg>\n";
}

std::string diff_heatmap_svg(const Eigen::MatrixXd& m, const std::string& title) {
  const double mx = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
  std::string s = svg_header(m.rows(), m.cols(), title);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double t = mx > 0.0 ? m(i, j) / mx : 0.0;  // in [-1, 1], 0 is white
      const double a = std::abs(t);
      const std::string fill =
          t >= 0.0 ? rgb(255.0 + (178.0 - 255.0) * a, 255.0 + (24.0 - 255.0) * a,
                         255.0 + (43.0 - 255.0) * a)
                   : rgb(255.0 + (33.0 - 255.0) * a, 255.0 + (102.0 - 255.0) * a,
                         255.0 + (172.0 - 255.0) * a);
      s += cell(i, j, fill, fmt3(m(i, j)), a > 0.55);
    }
  return s + "</svg>\n";
}

}  // namespace redcliff
