#include "afford3d/ply.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace afford3d {

void write_mask_ply(const std::string& path, const Tensor& coords,
                    const std::vector<double>& mask) {
    const int n = coords.rows();
    if (static_cast<int>(mask.size()) != n)
        throw std::runtime_error("write_mask_ply: mask/point count mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ply\n"
        << "format ascii 1.0\n"
        << "element vertex " << n << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property uchar red\n"
        << "property uchar green\n"
        << "property uchar blue\n"
        << "end_header\n";
    char buf[160];
    for (int i = 0; i < n; ++i) {
        const int red = static_cast<int>(std::lround(255.0 * mask[i]));
        const int blue = static_cast<int>(std::lround(255.0 * (1.0 - mask[i])));
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d 0 %d\n", coords(i, 0), coords(i, 1),
                      coords(i, 2), red, blue);
        out << buf;
    }
}

std::vector<PlyVertex> read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw std::runtime_error(path + ": not a ply file");
    long n = -1;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex", 0) == 0) {
            std::istringstream ss(line.substr(14));
            ss >> n;
        } else if (line == "end_header") {
            break;
        }
    }
    if (n < 0) throw std::runtime_error(path + ": missing vertex element");
    std::vector<PlyVertex> verts;
    verts.reserve(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        PlyVertex v{};
        if (!(in >> v.x >> v.y >> v.z >> v.r >> v.g >> v.b))
            throw std::runtime_error(path + ": truncated vertex data");
        verts.push_back(v);
    }
    return verts;
}

}  // namespace afford3d
