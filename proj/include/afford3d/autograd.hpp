#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "afford3d/tensor.hpp"

namespace afford3d::ag {

// Reverse-mode tape. Every op returns a Var whose node remembers its parents
// and a closure that routes the node's gradient to them. backward() walks the
// graph once in reverse topological order.
struct Node {
    Tensor val;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;
    int mark = 0;
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false)
        : n_(std::make_shared<Node>()) {
        n_->val = std::move(value);
        n_->requires_grad = requires_grad;
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor& val() const { return n_->val; }
    Tensor& val() { return n_->val; }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    Tensor& grad() const {
        if (n_->grad.numel() == 0) n_->grad = Tensor::zeros(n_->val.shape());
        return n_->grad;
    }
    void zero_grad() const {
        if (n_) n_->grad = Tensor();
    }

    std::shared_ptr<Node> node() const { return n_; }

    int rows() const { return n_->val.rows(); }
    int cols() const { return n_->val.cols(); }

private:
    std::shared_ptr<Node> n_;
};

bool grad_enabled();

// Disables tape recording in scope; forward values are unaffected.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Seeds d(root)/d(root) = 1 and propagates; root must be scalar.
void backward(const Var& root);

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back);

// elementwise / broadcast
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_col(const Var& a, const Var& col);   // col (C x 1) added to every column
Var mul_col(const Var& a, const Var& col);   // col (C x 1) scales every row entry
Var mul_row(const Var& a, const Var& row);   // row (T x 1) scales column t by row[t]
Var mul_scalarv(const Var& a, const Var& s); // s is 1x1
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var logv(const Var& a);
Var pow_const(const Var& a, double p);
Var clamp(const Var& a, double lo, double hi);

// linear algebra
Var matmul(const Var& a, const Var& b);
Var matmul_tn(const Var& a, const Var& b);  // a^T * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var softmax_rows(const Var& a);

// reductions / shaping
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var mean_cols(const Var& a);  // (C x T) -> (C x 1)
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int r1);
Var reshape(const Var& a, std::vector<int> shape);

// indexed ops
Var gather_cols(const Var& a, const std::vector<int>& idx);
Var segmented_max(const Var& a, const std::vector<int>& seg, int n_segments);

// k nearest columns, inverse-distance weights; idx/w per output column
Var weighted_cols(const Var& a, const std::vector<std::array<int, 3>>& idx,
                  const std::vector<std::array<double, 3>>& w);

// image ops; x has shape (C, H, W)
Var conv2d(const Var& x, const Var& weight, const Var& bias, int kh, int kw,
           int stride, int pad);
Var adaptive_avg_pool2d(const Var& x, int oh, int ow);
Var mul_spatial(const Var& x, const Tensor& wmap);
// box in feature-grid coordinates (x0, y0, x1, y1); bins x bins samples,
// one bilinear sample per bin center, output (C, bins*bins)
Var roi_align(const Var& x, const std::array<double, 4>& box, int bins);

// classification loss; logits (K x 1)
Var softmax_cross_entropy(const Var& logits, int label);

}  // namespace afford3d::ag
