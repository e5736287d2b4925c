#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "afford3d/tensor.hpp"

namespace afford3d {

constexpr int kNumAffordances = 17;
constexpr int kCanonicalPoints = 2048;

const std::vector<std::string>& affordance_vocab();

struct PointCloud {
    Tensor coords;  // N x 3, centered, unit max radius
    int n() const { return coords.rows(); }
};

// Boxes are half-open pixel rectangles (x0, y0, x1, y1). The scene mask is
// the complement of the union of the two boxes.
struct InteractionImage {
    Tensor pixels;  // (3, H, W), values in [0, 1]
    std::array<int, 4> box_subject{};
    std::array<int, 4> box_object{};
    Tensor scene_mask;  // H x W, {0, 1}
    int height() const { return pixels.size(1); }
    int width() const { return pixels.size(2); }
};

struct AffordanceSample {
    std::string id;
    PointCloud cloud;
    InteractionImage image;
    std::vector<double> gt_mask;  // length N, values in [0, 1]
    int label = 0;
    std::string category;
    std::vector<int> part_ids;  // filled by the synthetic generator, else empty
};

enum class Setting { seen, unseen };

std::string setting_name(Setting s);
Setting setting_from_name(const std::string& name);

struct DatasetSplit {
    Setting setting = Setting::seen;
    std::vector<AffordanceSample> train;
    std::vector<AffordanceSample> test;
    std::vector<std::string> categories;
    std::vector<std::string> affordances = affordance_vocab();
};

Tensor scene_mask_from_boxes(int height, int width, const std::array<int, 4>& box_subject,
                             const std::array<int, 4>& box_object);

// Re-centers to the centroid and scales to unit max radius. A cloud that is
// already normalized (within 1e-7) is left untouched so that load(save(x))
// round-trips bit-for-bit.
void normalize_cloud(PointCloud& cloud);

void validate_sample(const AffordanceSample& sample, bool canonical_size);

// Canonical on-disk layout:
//   <root>/<setting>/<train|test>/<sample_id>/
//     points.xyz  ASCII, one "x y z" per line
//     mask.txt    one float per line
//     image.ppm   binary P6
//     meta.txt    label=<int> category=<str> box_subject=... box_object=...
// expected_points: every cloud must have this many points; 0 adopts the
// first sample's count and enforces consistency (desk-scale roots)
DatasetSplit load_piad(const std::string& root, Setting setting,
                       int expected_points = kCanonicalPoints);
void save_piad(const DatasetSplit& split, const std::string& root);

DatasetSplit generate_synthetic(uint64_t seed, int n_samples, int n_points);

// Pairs every training cloud with exactly two images that share its label;
// a cloud whose label has a single candidate image gets it twice. Returns
// (cloud_index, image_index) pairs into split.train.
std::vector<std::pair<int, int>> pair_for_training(const DatasetSplit& split, uint64_t seed);

// plain file helpers, also used by the CLI
Tensor read_xyz(const std::string& path);
void write_xyz(const std::string& path, const Tensor& coords);
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& pixels);

}  // namespace afford3d
