#pragma once

#include <vector>

#include "afford3d/image_branch.hpp"
#include "afford3d/point_branch.hpp"

namespace afford3d {

struct FusedFeatures {
    ag::Var region_large;   // C x 64
    ag::Var region_small;   // C x 128
    ag::Var context_large;  // C x 16
    ag::Var context_small;  // C x 16
};

// Cross-modal fusion: each region scale attends to the 16 context tokens,
// then the context tokens attend back to the fused regions. Separate weight
// sets per scale and direction, residual connections around each block.
class Fusion {
public:
    Fusion() = default;
    Fusion(int channels, int heads, bool residual, uint64_t seed);

    FusedFeatures fuse(const ContextFeature& context, const RegionSet& large,
                       const RegionSet& small) const;

    // single-scale variants used directly by the msi-off wiring
    ag::Var fuse_regions(const ag::Var& regions, const ag::Var& context,
                         RegionScale scale) const;
    ag::Var fuse_context(const ag::Var& context, const ag::Var& fused_regions,
                         RegionScale scale) const;

    const nn::MultiHeadAttention& region_attention(RegionScale s) const {
        return s == RegionScale::large ? mha_region_l_ : mha_region_s_;
    }

    void params(std::vector<nn::Param>& out, bool include_large = true) const;

private:
    bool residual_ = true;
    nn::MultiHeadAttention mha_region_l_, mha_region_s_;    // regions -> context
    nn::MultiHeadAttention mha_context_l_, mha_context_s_;  // context -> regions
};

}  // namespace afford3d
