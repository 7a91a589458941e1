#pragma once

#include <array>
#include <string>

#include "kdp/types.hpp"

namespace kdp {

// Cell (x, y) colored by value, blue (min) to red (max); y grows upward.
void save_value_heatmap_svg(const std::string& path, const Mat& grid);

// Cell (x, y) colored by action index using a fixed 4-color coding:
// 0 (up / north) dark blue, 1 (right / east) light blue,
// 2 (down / south) yellow, 3 (left / west) brown.
void save_policy_map_svg(const std::string& path,
                         const Eigen::MatrixXi& actions);

}  // namespace kdp
