#pragma once

#include <array>
#include <vector>

#include "afford3d/point_branch.hpp"

namespace afford3d {

struct PropagatedFeatures {
    ag::Var refined_large;  // C x 64, values in (0,1)
    ag::Var refined_small;  // C x 128
};

struct SelectedFeatures {
    ag::Var per_point;  // C x N
    ag::Var context;    // C x 16
    ag::Var alpha;      // 1 x 1, in (0,1)
};

// 3-nearest-center inverse-distance weights; each row sums to exactly 1.
// A point that coincides with a center takes that center with weight 1.
struct InterpWeights {
    std::vector<std::array<int, 3>> idx;
    std::vector<std::array<double, 3>> w;
};
InterpWeights interp_weights(const Tensor& points, const Tensor& centers);

// Graph propagation over each similarity graph followed by soft scale
// selection and per-point upsampling.
class Propagation {
public:
    Propagation() = default;
    Propagation(int channels, int gcn_layers, int gate_hidden, bool share_scale_weights,
                uint64_t seed);

    // channel gates from mean-pooled raw features, broadcast onto fused
    ag::Var reweight_init(const ag::Var& fused, const ag::Var& raw, RegionScale scale) const;

    ag::Var gcn_propagate(const ag::Var& init, const SimilarityGraph& graph,
                          RegionScale scale) const;

    // gate scores from mean-pooled refined features; alpha = a_l / (a_l + a_s)
    ag::Var scale_gate(const ag::Var& refined_large, const ag::Var& refined_small) const;

    SelectedFeatures select_and_upsample(const PropagatedFeatures& refined,
                                         const ag::Var& context_large,
                                         const ag::Var& context_small, const RegionSet& large,
                                         const RegionSet& small, const PointCloud& cloud) const;

    int layers() const { return layers_; }

    void params(std::vector<nn::Param>& out, bool include_large = true,
                bool include_gcn = true) const;

private:
    int layers_ = 2;
    bool share_scale_weights_ = false;
    nn::Linear gamma_l_, gamma_s_;         // reweight gates
    std::vector<ag::Var> w_l_, w_s_;       // GCN weights, C x C per layer
    nn::Mlp gate_;                         // shared scale-gate MLP, C -> hidden -> 1
};

}  // namespace afford3d
