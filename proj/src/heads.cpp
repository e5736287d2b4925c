#include "afford3d/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace afford3d {

int Prediction::predicted_label() const {
    int best = 0;
    for (size_t i = 1; i < class_probs.numel(); ++i)
        if (class_probs[i] > class_probs[best]) best = static_cast<int>(i);
    return best;
}

Heads::Heads(int channels, int mask_hidden, int class_hidden, int n_classes, bool decoupled,
             uint64_t seed)
    : n_classes_(n_classes),
      decoupled_(decoupled),
      mask_mlp_("heads.mask", channels, mask_hidden, 1, seed),
      class_mlp_("heads.class", 2 * channels, class_hidden, n_classes, seed) {}

ag::Var Heads::predict_mask(const ag::Var& per_point) const {
    const int n = per_point.cols();
    const ag::Var row = ag::sigmoid(mask_mlp_.forward(per_point));  // 1 x N
    return ag::reshape(row, {n, 1});
}

Heads::ClassOutput Heads::predict_class(const ag::Var& context, const ag::Var& per_point,
                                        const ag::Var& mask) const {
    const ag::Var ctx_pool = ag::mean_cols(context);  // C x 1
    ag::Var local_pool;
    if (decoupled_) {
        local_pool = ag::mean_cols(per_point);
    } else {
        local_pool = ag::mean_cols(ag::mul_row(per_point, mask));
    }
    ClassOutput out;
    out.local_pool = local_pool.val();
    out.logits = class_mlp_.forward(ag::concat_rows({ctx_pool, local_pool}));

    // softmax over the logit values
    const Tensor& lg = out.logits.val();
    double m = lg[0];
    for (size_t i = 1; i < lg.numel(); ++i) m = std::max(m, lg[i]);
    double sum = 0.0;
    out.probs = Tensor(static_cast<int>(lg.numel()), 1);
    for (size_t i = 0; i < lg.numel(); ++i) {
        out.probs[i] = std::exp(lg[i] - m);
        sum += out.probs[i];
    }
    for (size_t i = 0; i < lg.numel(); ++i) out.probs[i] /= sum;
    return out;
}

void Heads::params(std::vector<nn::Param>& out) const {
    mask_mlp_.params(out);
    class_mlp_.params(out);
}

ag::Var grounding_loss(const ag::Var& pred_mask, const std::vector<double>& gt_mask,
                       const FocalConfig& cfg) {
    const int n = static_cast<int>(gt_mask.size());
    if (static_cast<int>(pred_mask.val().numel()) != n)
        throw std::runtime_error("grounding_loss: length mismatch");
    for (size_t i = 0; i < pred_mask.val().numel(); ++i)
        if (!(pred_mask.val()[i] >= 0.0 && pred_mask.val()[i] <= 1.0))
            throw std::runtime_error("grounding_loss: prediction outside [0,1]");
    Tensor gt(n, 1);
    for (int i = 0; i < n; ++i) {
        if (!(gt_mask[i] >= 0.0 && gt_mask[i] <= 1.0))
            throw std::runtime_error("grounding_loss: target outside [0,1]");
        gt[i] = gt_mask[i];
    }
    const ag::Var g(gt);
    const ag::Var ones(Tensor::full({n, 1}, 1.0));

    // focal with soft targets; probabilities clamped away from {0,1} for logs
    const ag::Var p = ag::clamp(pred_mask, 1e-7, 1.0 - 1e-7);
    const ag::Var one_minus_p = ag::sub(ones, p);
    const ag::Var one_minus_g = ag::sub(ones, g);
    const ag::Var pos = ag::mul(ag::mul(g, ag::pow_const(one_minus_p, cfg.gamma)), ag::logv(p));
    const ag::Var neg = ag::mul(ag::mul(one_minus_g, ag::pow_const(p, cfg.gamma)),
                                ag::logv(one_minus_p));
    const ag::Var focal = ag::scale(
        ag::mean_all(ag::add(ag::scale(pos, cfg.alpha), ag::scale(neg, 1.0 - cfg.alpha))), -1.0);

    // soft dice with squared denominator
    const ag::Var inter = ag::sum_all(ag::mul(pred_mask, g));
    const ag::Var denom =
        ag::add(ag::sum_all(ag::mul(pred_mask, pred_mask)), ag::sum_all(ag::mul(g, g)));
    const ag::Var dice_ratio =
        ag::div(ag::add_const(ag::scale(inter, 2.0), cfg.dice_eps),
                ag::add_const(denom, cfg.dice_eps));
    const ag::Var dice = ag::add_const(ag::scale(dice_ratio, -1.0), 1.0);

    return ag::add(focal, dice);
}

LossReport total_loss(const Prediction& pred, const AffordanceSample& sample, double lambda_c,
                      const FocalConfig& cfg) {
    LossReport report;
    report.lambda_c = lambda_c;
    const ag::Var g_loss = grounding_loss(pred.mask, sample.gt_mask, cfg);
    const ag::Var c_loss = ag::softmax_cross_entropy(pred.class_logits, sample.label);
    report.grounding = g_loss.val().item();
    report.classification = c_loss.val().item();
    report.total = report.grounding + lambda_c * report.classification;
    report.total_var = ag::add(g_loss, ag::scale(c_loss, lambda_c));
    return report;
}

}  // namespace afford3d
