#include "afford3d/model.hpp"

namespace afford3d {

AffordModel::AffordModel(const ModelConfig& cfg)
    : cfg_(cfg),
      image_branch_(cfg.channels, cfg.heads, cfg.resize_to, cfg.ablations.sg, cfg.seed),
      point_branch_(cfg.channels, cfg.knn_k, cfg.scale_large, cfg.scale_small, cfg.seed),
      fusion_(cfg.channels, cfg.heads, cfg.residual_fusion, cfg.seed),
      propagation_(cfg.channels, cfg.gcn_layers, cfg.gate_hidden, cfg.share_gcn_weights,
                   cfg.seed),
      heads_(cfg.channels, cfg.mask_hidden, cfg.class_hidden, cfg.n_classes,
             /*decoupled=*/!cfg.ablations.cgc, cfg.seed) {}

Prediction AffordModel::forward(const PointCloud& cloud, const InteractionImage& image,
                                ForwardTrace* trace) const {
    const auto img = image_branch_.forward(image);
    const ag::Var point_feats = point_branch_.point_features(cloud);

    const RegionSet small = point_branch_.group(cloud, point_feats, RegionScale::small);
    SimilarityGraph graph_small;
    if (cfg_.ablations.gfpm || trace) graph_small = build_graph(small);

    const ag::Var fused_small =
        fusion_.fuse_regions(small.features, img.context.tokens, RegionScale::small);
    const ag::Var ctx_small =
        fusion_.fuse_context(img.context.tokens, fused_small, RegionScale::small);
    ag::Var refined_small = fused_small;
    if (cfg_.ablations.gfpm) {
        const ag::Var init =
            propagation_.reweight_init(fused_small, small.features, RegionScale::small);
        refined_small = propagation_.gcn_propagate(init, graph_small, RegionScale::small);
    }

    ag::Var per_point, ctx_final;
    double alpha = 0.0;
    RegionSet large;
    SimilarityGraph graph_large;
    ag::Var fused_large, ctx_large, refined_large;
    if (cfg_.ablations.msi) {
        large = point_branch_.group(cloud, point_feats, RegionScale::large);
        if (cfg_.ablations.gfpm || trace) graph_large = build_graph(large);
        fused_large =
            fusion_.fuse_regions(large.features, img.context.tokens, RegionScale::large);
        ctx_large = fusion_.fuse_context(img.context.tokens, fused_large, RegionScale::large);
        refined_large = fused_large;
        if (cfg_.ablations.gfpm) {
            const ag::Var init =
                propagation_.reweight_init(fused_large, large.features, RegionScale::large);
            refined_large = propagation_.gcn_propagate(init, graph_large, RegionScale::large);
        }
        const SelectedFeatures sel = propagation_.select_and_upsample(
            {refined_large, refined_small}, ctx_large, ctx_small, large, small, cloud);
        per_point = sel.per_point;
        ctx_final = sel.context;
        alpha = sel.alpha.val().item();
    } else {
        // single scale, no selection gate
        const InterpWeights iw = interp_weights(cloud.coords, small.centers);
        per_point = ag::weighted_cols(refined_small, iw.idx, iw.w);
        ctx_final = ctx_small;
    }

    Prediction pred;
    pred.mask = heads_.predict_mask(per_point);
    const auto cls = heads_.predict_class(ctx_final, per_point, pred.mask);
    pred.class_logits = cls.logits;
    pred.class_probs = cls.probs;

    if (trace) {
        trace->image_embedding = img.embedding.grid.val();
        trace->f_object = img.entities.object.val();
        trace->f_subject = img.entities.subject.val();
        trace->f_scene = img.entities.scene.val();
        trace->f_entity = img.f_entity.val();
        trace->f_scene_fused = img.f_scene.val();
        trace->context = img.context.tokens.val();
        trace->regions_small = small.features.val();
        trace->graph_small = graph_small.normalized;
        trace->fused_small = fused_small.val();
        trace->context_small = ctx_small.val();
        trace->refined_small = refined_small.val();
        if (cfg_.ablations.msi) {
            trace->regions_large = large.features.val();
            trace->graph_large = graph_large.normalized;
            trace->fused_large = fused_large.val();
            trace->context_large = ctx_large.val();
            trace->refined_large = refined_large.val();
        }
        trace->alpha = alpha;
        trace->per_point = per_point.val();
        trace->context_final = ctx_final.val();
        trace->mask = pred.mask.val();
        trace->class_local_pool = cls.local_pool;
        trace->class_logits = pred.class_logits.val();
        trace->class_probs = pred.class_probs;
    }
    return pred;
}

std::vector<nn::Param> AffordModel::params() const {
    std::vector<nn::Param> out;
    image_branch_.params(out);
    point_branch_.params(out);
    fusion_.params(out, /*include_large=*/cfg_.ablations.msi);
    propagation_.params(out, /*include_large=*/cfg_.ablations.msi,
                        /*include_gcn=*/cfg_.ablations.gfpm);
    heads_.params(out);
    return out;
}

}  // namespace afford3d
