#pragma once

#include <vector>

#include "afford3d/data.hpp"
#include "afford3d/nn.hpp"

namespace afford3d {

enum class RegionScale { large, small };  // 64 or 128 regions

struct RegionSet {
    RegionScale scale = RegionScale::large;
    Tensor centers;                 // M x 3
    std::vector<int> center_index;  // FPS picks into the cloud
    std::vector<int> assignment;    // per point, owning region
    ag::Var features;               // C x M
    int m() const { return centers.rows(); }
};

struct SimilarityGraph {
    Tensor raw;         // M x M, cosine of region features
    Tensor adjacency;   // relu(raw) + I
    Tensor normalized;  // D^-1/2 A D^-1/2
};

// Greedy max-min selection; ties broken toward the lowest index.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int m, int start);

SimilarityGraph build_graph(const RegionSet& regions);
SimilarityGraph build_graph_from_features(const Tensor& features);

// k nearest neighbours per point (self included), sorted by (distance, index)
std::vector<std::vector<int>> knn_indices(const Tensor& coords, int k);

// Multi-scale geometric branch: a two-level set-abstraction encoder shared by
// both scales, FPS region centers, nearest-center assignment, max pooling.
class PointBranch {
public:
    PointBranch() = default;
    PointBranch(int channels, int knn_k, int large_regions, int small_regions, uint64_t seed);

    // per-point features (C x N); shared between the two scales
    ag::Var point_features(const PointCloud& cloud) const;

    RegionSet group(const PointCloud& cloud, const ag::Var& point_feats,
                    RegionScale scale) const;

    // removes the shared component across regions; without this the region
    // cosines cluster near 1 and the similarity graph degenerates into a
    // uniform average
    static ag::Var center_regions(const ag::Var& pooled) {
        return ag::add_col(pooled, ag::scale(ag::mean_cols(pooled), -1.0));
    }

    RegionSet extract_regions(const PointCloud& cloud, RegionScale scale) const {
        return group(cloud, point_features(cloud), scale);
    }

    int regions_at(RegionScale scale) const {
        return scale == RegionScale::large ? large_ : small_;
    }
    int knn_k() const { return k_; }

    void params(std::vector<nn::Param>& out) const;

private:
    int channels_ = 512;
    int k_ = 16;
    int large_ = 64;
    int small_ = 128;
    nn::Linear l1a_, l1b_;  // local geometry, level 1
    nn::Linear l2_;         // level 2 over gathered level-1 features
    nn::Linear lift_;       // pointwise lift to C
};

}  // namespace afford3d
