#pragma once

#include <array>
#include <utility>
#include <vector>

#include "afford3d/data.hpp"
#include "afford3d/nn.hpp"

namespace afford3d {

struct ImageEmbedding {
    ag::Var grid;  // (C, h, w)
    int channels() const { return grid.val().size(0); }
    int h() const { return grid.val().size(1); }
    int w() const { return grid.val().size(2); }
};

struct EntityFeatures {
    ag::Var object, subject, scene;  // each C x 16
};

struct ContextFeature {
    ag::Var tokens;  // C x 16
};

// bilinear resize of a (3, H, W) pixel tensor; identity when sizes match
Tensor resize_bilinear(const Tensor& pixels, int out_h, int out_w);

// for receptive-field arithmetic in tests
struct ConvStage {
    int kernel, stride, pad;
};

// 2D context branch: compact conv encoder -> ROI pooling of object / subject /
// scene -> entity cross-attention -> scene gate. Output tokens are C x 16.
class ImageBranch {
public:
    ImageBranch() = default;
    ImageBranch(int channels, int heads, int resize_to, bool scene_gate_enabled,
                uint64_t seed);

    ImageEmbedding encode_image(const InteractionImage& image, int resize_to) const;
    ImageEmbedding encode_image(const InteractionImage& image) const {
        return encode_image(image, resize_to_);
    }

    EntityFeatures roi_pool(const ImageEmbedding& embed, const InteractionImage& image) const;

    // f_e = MHA(object -> subject), f_s = MHA(object -> scene)
    std::pair<ag::Var, ag::Var> fuse_entities(const EntityFeatures& ents) const;

    ContextFeature scene_gate(const ag::Var& f_e, const ag::Var& f_s) const;

    struct Activations {
        ImageEmbedding embedding;
        EntityFeatures entities;
        ag::Var f_entity, f_scene;
        ContextFeature context;
    };
    Activations forward(const InteractionImage& image) const;

    void params(std::vector<nn::Param>& out) const;

    const std::vector<ConvStage>& stages() const { return stages_; }
    int grid_size(int input) const;  // spatial size after the conv stack
    static constexpr int kGrid = 7;
    static constexpr int kRoiBins = 4;

    const nn::MultiHeadAttention& entity_attention() const { return mha_entity_; }
    const nn::MultiHeadAttention& scene_attention() const { return mha_scene_; }
    const nn::Linear& gate_linear() const { return gate_ln_; }
    nn::Linear& gate_linear() { return gate_ln_; }
    const nn::Linear& output_linear() const { return out_lp_; }
    bool scene_gate_enabled() const { return scene_gate_enabled_; }

private:
    int channels_ = 512;
    int resize_to_ = 224;
    bool scene_gate_enabled_ = true;
    std::vector<nn::Conv2d> convs_;
    std::vector<ConvStage> stages_;
    nn::Conv2d proj_;  // 1x1 to the target channel width
    nn::MultiHeadAttention mha_entity_, mha_scene_;
    nn::Linear gate_ln_;  // the gate's linear layer
    nn::Linear out_lp_;   // linear + relu after gating
};

}  // namespace afford3d
