#include "afford3d/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace afford3d {

InterpWeights interp_weights(const Tensor& points, const Tensor& centers) {
    const int n = points.rows(), m = centers.rows();
    if (m < 3) throw std::runtime_error("interp_weights: need at least 3 centers");
    InterpWeights out;
    out.idx.resize(n);
    out.w.resize(n);
    for (int p = 0; p < n; ++p) {
        // three nearest centers, ties toward the lower index
        std::array<double, 3> d2{1e300, 1e300, 1e300};
        std::array<int, 3> id{-1, -1, -1};
        for (int c = 0; c < m; ++c) {
            const double dx = points(p, 0) - centers(c, 0);
            const double dy = points(p, 1) - centers(c, 1);
            const double dz = points(p, 2) - centers(c, 2);
            double d = dx * dx + dy * dy + dz * dz;
            int cand = c;
            for (int s = 0; s < 3; ++s)
                if (d < d2[s]) {
                    std::swap(d, d2[s]);
                    std::swap(cand, id[s]);
                }
        }
        out.idx[p] = id;
        if (d2[0] < 1e-24) {
            // coincident with a center: that center takes everything
            out.idx[p] = {id[0], id[0], id[0]};
            out.w[p] = {1.0, 0.0, 0.0};
            continue;
        }
        const double r0 = 1.0 / std::sqrt(d2[0]);
        const double r1 = 1.0 / std::sqrt(d2[1]);
        const double r2 = 1.0 / std::sqrt(d2[2]);
        const double sum = r0 + r1 + r2;
        const double w0 = r0 / sum;
        const double w1 = r1 / sum;
        // w0 + w1 >= 2/3, so 1 - (w0 + w1) is exact and the three weights
        // sum to exactly one in the accumulation order used downstream
        out.w[p] = {w0, w1, 1.0 - (w0 + w1)};
    }
    return out;
}

Propagation::Propagation(int channels, int gcn_layers, int gate_hidden,
                         bool share_scale_weights, uint64_t seed)
    : layers_(gcn_layers),
      share_scale_weights_(share_scale_weights),
      gamma_l_("propagation.gamma_large", channels, channels, seed),
      gamma_s_("propagation.gamma_small", channels, channels, seed),
      gate_("propagation.scale_gate", channels, gate_hidden, 1, seed) {
    if (gcn_layers < 1) throw std::runtime_error("gcn_propagate: layers must be >= 1");
    // the sigmoid between layers contracts signal; a larger init keeps the
    // propagated features from collapsing to a constant
    const double gain = 16.0 / channels;
    for (int t = 0; t < layers_; ++t) {
        w_l_.push_back(nn::init_weight("propagation.gcn_large.w" + std::to_string(t),
                                       {channels, channels}, seed, gain * channels));
        if (share_scale_weights_)
            w_s_.push_back(w_l_.back());
        else
            w_s_.push_back(nn::init_weight("propagation.gcn_small.w" + std::to_string(t),
                                           {channels, channels}, seed, gain * channels));
    }
}

ag::Var Propagation::reweight_init(const ag::Var& fused, const ag::Var& raw,
                                   RegionScale scale) const {
    const auto& gamma = scale == RegionScale::large ? gamma_l_ : gamma_s_;
    const ag::Var pooled = ag::mean_cols(raw);                  // C x 1
    const ag::Var gates = ag::sigmoid(gamma.forward(pooled));   // C x 1
    return ag::mul_col(fused, gates);
}

ag::Var Propagation::gcn_propagate(const ag::Var& init, const SimilarityGraph& graph,
                                   RegionScale scale) const {
    if (!graph.normalized.all_finite())
        throw std::runtime_error("gcn_propagate: non-finite graph");
    const auto& weights = scale == RegionScale::large ? w_l_ : w_s_;
    const ag::Var adj(graph.normalized);  // constant; no gradient into the graph
    ag::Var r = init;
    for (const auto& w : weights)
        r = ag::sigmoid(ag::matmul(w, ag::matmul(r, adj)));
    return r;
}

ag::Var Propagation::scale_gate(const ag::Var& refined_large,
                                const ag::Var& refined_small) const {
    const ag::Var a1 = ag::softplus(gate_.forward(ag::mean_cols(refined_large)));
    const ag::Var a2 = ag::softplus(gate_.forward(ag::mean_cols(refined_small)));
    return ag::div(a1, ag::add(a1, a2));
}

SelectedFeatures Propagation::select_and_upsample(const PropagatedFeatures& refined,
                                                  const ag::Var& context_large,
                                                  const ag::Var& context_small,
                                                  const RegionSet& large,
                                                  const RegionSet& small,
                                                  const PointCloud& cloud) const {
    SelectedFeatures out;
    out.alpha = scale_gate(refined.refined_large, refined.refined_small);

    const InterpWeights wl = interp_weights(cloud.coords, large.centers);
    const InterpWeights ws = interp_weights(cloud.coords, small.centers);
    const ag::Var up_l = ag::weighted_cols(refined.refined_large, wl.idx, wl.w);
    const ag::Var up_s = ag::weighted_cols(refined.refined_small, ws.idx, ws.w);

    const ag::Var one(Tensor::scalar(1.0));
    const ag::Var beta = ag::sub(one, out.alpha);
    out.per_point = ag::add(ag::mul_scalarv(up_l, out.alpha), ag::mul_scalarv(up_s, beta));
    out.context =
        ag::add(ag::mul_scalarv(context_large, out.alpha), ag::mul_scalarv(context_small, beta));
    return out;
}

void Propagation::params(std::vector<nn::Param>& out, bool include_large,
                         bool include_gcn) const {
    if (include_gcn) {
        if (include_large) gamma_l_.params(out);
        gamma_s_.params(out);
        for (int t = 0; t < layers_; ++t) {
            if (share_scale_weights_) {
                out.push_back({"propagation.gcn_large.w" + std::to_string(t), w_l_[t]});
            } else {
                if (include_large)
                    out.push_back({"propagation.gcn_large.w" + std::to_string(t), w_l_[t]});
                out.push_back({"propagation.gcn_small.w" + std::to_string(t), w_s_[t]});
            }
        }
    }
    // the scale gate only exists when both scales are in play
    if (include_large) gate_.params(out);
}

}  // namespace afford3d
