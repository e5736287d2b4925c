#pragma once

#include <string>
#include <vector>

#include "afford3d/tensor.hpp"

namespace afford3d {

struct PlyVertex {
    double x, y, z;
    int r, g, b;
};

// ASCII point cloud with per-vertex uchar color; mask value v maps to
// (round(255 v), 0, round(255 (1 - v))).
void write_mask_ply(const std::string& path, const Tensor& coords,
                    const std::vector<double>& mask);

std::vector<PlyVertex> read_ply(const std::string& path);

}  // namespace afford3d
