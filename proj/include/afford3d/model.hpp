#pragma once

#include <memory>
#include <string>
#include <vector>

#include "afford3d/fusion.hpp"
#include "afford3d/heads.hpp"
#include "afford3d/image_branch.hpp"
#include "afford3d/point_branch.hpp"
#include "afford3d/propagation.hpp"

namespace afford3d {

// Pipeline toggles mirroring the ablation variants: multi-scale information,
// graph feature propagation, grounding/classification coupling, scene gate.
struct Ablations {
    bool msi = true;
    bool gfpm = true;
    bool cgc = true;
    bool sg = true;
};

struct ModelConfig {
    int channels = 512;
    int heads = 4;
    int scale_large = 64;
    int scale_small = 128;
    int knn_k = 16;
    int gcn_layers = 2;
    int resize_to = 224;
    int mask_hidden = 128;
    int class_hidden = 128;
    int gate_hidden = 64;
    int n_classes = kNumAffordances;
    bool residual_fusion = true;
    bool share_gcn_weights = false;
    Ablations ablations;
    uint64_t seed = 0;
};

// Every intermediate of one forward pass, for shape checks and ablation
// activation diffs. Large-scale fields stay empty when msi is off.
struct ForwardTrace {
    Tensor image_embedding;                // C x 7 x 7
    Tensor f_object, f_subject, f_scene;   // C x 16
    Tensor f_entity, f_scene_fused;        // C x 16
    Tensor context;                        // C x 16
    Tensor regions_large, regions_small;   // C x 64 / C x 128
    Tensor graph_large, graph_small;       // 64 x 64 / 128 x 128
    Tensor fused_large, fused_small;       // C x 64 / C x 128
    Tensor context_large, context_small;   // C x 16
    Tensor refined_large, refined_small;   // C x 64 / C x 128
    double alpha = 0.0;
    Tensor per_point;                      // C x N
    Tensor context_final;                  // C x 16
    Tensor mask;                           // N x 1
    Tensor class_local_pool;               // C x 1
    Tensor class_logits;                   // 17 x 1
    Tensor class_probs;                    // 17 x 1
};

class AffordModel {
public:
    explicit AffordModel(const ModelConfig& cfg);

    Prediction forward(const PointCloud& cloud, const InteractionImage& image,
                       ForwardTrace* trace = nullptr) const;

    const ModelConfig& config() const { return cfg_; }
    std::vector<nn::Param> params() const;

    ImageBranch& image_branch() { return image_branch_; }
    PointBranch& point_branch() { return point_branch_; }
    Fusion& fusion() { return fusion_; }
    Propagation& propagation() { return propagation_; }
    Heads& heads() { return heads_; }
    const ImageBranch& image_branch() const { return image_branch_; }
    const PointBranch& point_branch() const { return point_branch_; }
    const Fusion& fusion() const { return fusion_; }
    const Propagation& propagation() const { return propagation_; }
    const Heads& heads() const { return heads_; }

private:
    ModelConfig cfg_;
    ImageBranch image_branch_;
    PointBranch point_branch_;
    Fusion fusion_;
    Propagation propagation_;
    Heads heads_;
};

}  // namespace afford3d
