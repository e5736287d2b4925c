#include "afford3d/fusion.hpp"

namespace afford3d {

Fusion::Fusion(int channels, int heads, bool residual, uint64_t seed)
    : residual_(residual),
      mha_region_l_("fusion.region_large", channels, heads, seed, residual),
      mha_region_s_("fusion.region_small", channels, heads, seed, residual),
      mha_context_l_("fusion.context_large", channels, heads, seed, residual),
      mha_context_s_("fusion.context_small", channels, heads, seed, residual) {}

ag::Var Fusion::fuse_regions(const ag::Var& regions, const ag::Var& context,
                             RegionScale scale) const {
    const auto& mha = scale == RegionScale::large ? mha_region_l_ : mha_region_s_;
    ag::Var out = mha.forward(regions, context);
    return residual_ ? ag::add(regions, out) : out;
}

ag::Var Fusion::fuse_context(const ag::Var& context, const ag::Var& fused_regions,
                             RegionScale scale) const {
    const auto& mha = scale == RegionScale::large ? mha_context_l_ : mha_context_s_;
    ag::Var out = mha.forward(context, fused_regions);
    return residual_ ? ag::add(context, out) : out;
}

FusedFeatures Fusion::fuse(const ContextFeature& context, const RegionSet& large,
                           const RegionSet& small) const {
    FusedFeatures out;
    out.region_large = fuse_regions(large.features, context.tokens, RegionScale::large);
    out.region_small = fuse_regions(small.features, context.tokens, RegionScale::small);
    out.context_large = fuse_context(context.tokens, out.region_large, RegionScale::large);
    out.context_small = fuse_context(context.tokens, out.region_small, RegionScale::small);
    return out;
}

void Fusion::params(std::vector<nn::Param>& out, bool include_large) const {
    if (include_large) {
        mha_region_l_.params(out);
        mha_context_l_.params(out);
    }
    mha_region_s_.params(out);
    mha_context_s_.params(out);
}

}  // namespace afford3d
