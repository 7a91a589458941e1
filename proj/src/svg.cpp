#include "kdp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace kdp {

namespace {

constexpr int kCell = 10;  // pixels per grid cell

std::string rgb(int r, int g, int b) {
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," +
         std::to_string(b) + ")";
}

std::string value_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r = static_cast<int>(std::lround(255.0 * t));
  int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  int g = static_cast<int>(std::lround(80.0 * (1.0 - std::abs(2.0 * t - 1.0))));
  return rgb(r, g, b);
}

std::ofstream open_svg(const std::string& path, Index w, Index h) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * kCell
      << "\" height=\"" << h * kCell << "\">\n";
  return out;
}

void emit_cell(std::ofstream& out, Index x, Index y, Index height,
               const std::string& color) {
  // y flipped so row 0 renders at the bottom
  out << "<rect x=\"" << x * kCell << "\" y=\"" << (height - 1 - y) * kCell
      << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\""
      << color << "\"/>\n";
}

}  // namespace

void save_value_heatmap_svg(const std::string& path, const Mat& grid) {
  if (grid.size() == 0) {
    throw std::invalid_argument("save_value_heatmap_svg: empty grid");
  }
  double lo = grid.minCoeff();
  double hi = grid.maxCoeff();
  double span = hi - lo;
  if (span <= 0.0) span = 1.0;
  std::ofstream out = open_svg(path, grid.cols(), grid.rows());
  for (Index y = 0; y < grid.rows(); ++y) {
    for (Index x = 0; x < grid.cols(); ++x) {
      emit_cell(out, x, y, grid.rows(), value_color((grid(y, x) - lo) / span));
    }
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

void save_policy_map_svg(const std::string& path,
                         const Eigen::MatrixXi& actions) {
  if (actions.size() == 0) {
    throw std::invalid_argument("save_policy_map_svg: empty grid");
  }
  static const std::array<std::string, 4> colors = {
      rgb(10, 10, 120),    // up: dark blue
      rgb(120, 190, 255),  // right: light blue
      rgb(240, 220, 40),   // down: yellow
      rgb(140, 80, 30),    // left: brown
  };
  std::ofstream out = open_svg(path, actions.cols(), actions.rows());
  for (Index y = 0; y < actions.rows(); ++y) {
    for (Index x = 0; x < actions.cols(); ++x) {
      int a = actions(y, x);
      std::string color = (a >= 0 && a < 4) ? colors[a] : rgb(0, 0, 0);
      emit_cell(out, x, y, actions.rows(), color);
    }
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace kdp
