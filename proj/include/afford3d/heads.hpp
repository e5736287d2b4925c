#pragma once

#include <vector>

#include "afford3d/data.hpp"
#include "afford3d/nn.hpp"

namespace afford3d {

struct Prediction {
    ag::Var mask;          // N x 1, values in (0,1)
    ag::Var class_logits;  // 17 x 1
    Tensor class_probs;    // 17 x 1, softmax of the logits
    int predicted_label() const;
};

struct LossReport {
    double total = 0.0;
    double grounding = 0.0;
    double classification = 0.0;
    double lambda_c = 0.3;
    ag::Var total_var;  // backpropagation entry point
};

struct FocalConfig {
    double gamma = 2.0;
    double alpha = 0.25;
    double dice_eps = 1e-6;
};

// Cascade: the grounding mask is predicted first; the classifier consumes the
// pooled context tokens concatenated with mask-weighted pooled point features.
class Heads {
public:
    Heads() = default;
    Heads(int channels, int mask_hidden, int class_hidden, int n_classes, bool decoupled,
          uint64_t seed);

    ag::Var predict_mask(const ag::Var& per_point) const;  // N x 1

    struct ClassOutput {
        ag::Var logits;
        Tensor probs;
        Tensor local_pool;  // C x 1, the mask-weighted branch of the input
    };
    ClassOutput predict_class(const ag::Var& context, const ag::Var& per_point,
                              const ag::Var& mask) const;

    bool decoupled() const { return decoupled_; }
    int n_classes() const { return n_classes_; }

    void params(std::vector<nn::Param>& out) const;

private:
    int n_classes_ = kNumAffordances;
    bool decoupled_ = false;  // when set, classification ignores the mask
    nn::Mlp mask_mlp_;
    nn::Mlp class_mlp_;
};

// focal + dice over soft masks; inputs must lie in [0,1]
ag::Var grounding_loss(const ag::Var& pred_mask, const std::vector<double>& gt_mask,
                       const FocalConfig& cfg = {});

LossReport total_loss(const Prediction& pred, const AffordanceSample& sample, double lambda_c,
                      const FocalConfig& cfg = {});

}  // namespace afford3d
