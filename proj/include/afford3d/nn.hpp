#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "afford3d/autograd.hpp"
#include "afford3d/rng.hpp"
#include "afford3d/tensor.hpp"

namespace afford3d::nn {

// A named trainable tensor. The Var shares its node with the owning layer,
// so optimizer updates through the Param are visible everywhere.
struct Param {
    std::string name;
    ag::Var var;
};

inline ag::Var init_weight(const std::string& name, std::vector<int> shape,
                           uint64_t seed, double fan_in) {
    Rng rng(seed_for(seed, name));
    const double stddev = std::sqrt(1.0 / std::max(1.0, fan_in));
    return ag::Var(Tensor::randn(std::move(shape), rng, stddev), true);
}

struct Linear {
    std::string name;
    ag::Var W, b;

    Linear() = default;
    Linear(std::string n, int in, int out, uint64_t seed) : name(std::move(n)) {
        W = init_weight(name + ".W", {out, in}, seed, in);
        b = ag::Var(Tensor(out, 1), true);
    }

    ag::Var forward(const ag::Var& x) const { return ag::add_col(ag::matmul(W, x), b); }

    void params(std::vector<Param>& out) const {
        out.push_back({name + ".W", W});
        out.push_back({name + ".b", b});
    }
};

struct Conv2d {
    std::string name;
    ag::Var W, b;
    int kernel = 3, stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(std::string n, int in, int out, int k, int s, int p, uint64_t seed)
        : name(std::move(n)), kernel(k), stride(s), pad(p) {
        W = init_weight(name + ".W", {out, in * k * k}, seed, in * k * k);
        b = ag::Var(Tensor(out, 1), true);
    }

    ag::Var forward(const ag::Var& x) const {
        return ag::conv2d(x, W, b, kernel, kernel, stride, pad);
    }

    void params(std::vector<Param>& out) const {
        out.push_back({name + ".W", W});
        out.push_back({name + ".b", b});
    }
};

// Multi-head attention over token matrices (channels x tokens). Queries come
// from q_in, keys/values from kv_in. Attention maps from the latest forward
// are kept for inspection; each row sums to 1.
struct MultiHeadAttention {
    std::string name;
    Linear wq, wk, wv, wo;
    int heads = 4;
    int dim = 0;
    mutable std::vector<Tensor> last_attn;

    MultiHeadAttention() = default;
    // zero_out starts the output projection at zero, so a residual block is
    // the identity at initialization and the attention path fades in
    MultiHeadAttention(std::string n, int d, int h, uint64_t seed, bool zero_out = false)
        : name(std::move(n)),
          wq(name + ".wq", d, d, seed),
          wk(name + ".wk", d, d, seed),
          wv(name + ".wv", d, d, seed),
          wo(name + ".wo", d, d, seed),
          heads(h),
          dim(d) {
        assert(d % h == 0);
        if (zero_out) wo.W.val().fill(0.0);
    }

    ag::Var forward(const ag::Var& q_in, const ag::Var& kv_in) const {
        const int dh = dim / heads;
        const ag::Var q = wq.forward(q_in);
        const ag::Var k = wk.forward(kv_in);
        const ag::Var v = wv.forward(kv_in);
        last_attn.clear();
        std::vector<ag::Var> head_outs;
        head_outs.reserve(heads);
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int h = 0; h < heads; ++h) {
            const ag::Var qh = ag::slice_rows(q, h * dh, (h + 1) * dh);
            const ag::Var kh = ag::slice_rows(k, h * dh, (h + 1) * dh);
            const ag::Var vh = ag::slice_rows(v, h * dh, (h + 1) * dh);
            const ag::Var scores = ag::scale(ag::matmul_tn(qh, kh), inv_sqrt);
            const ag::Var attn = ag::softmax_rows(scores);  // (Tq x Tk)
            last_attn.push_back(attn.val());
            head_outs.push_back(ag::matmul_nt(vh, attn));  // (dh x Tq)
        }
        return wo.forward(ag::concat_rows(head_outs));
    }

    void params(std::vector<Param>& out) const {
        wq.params(out);
        wk.params(out);
        wv.params(out);
        wo.params(out);
    }
};

// Two-layer MLP with ReLU in between; the head activation is the caller's.
struct Mlp {
    std::string name;
    Linear l1, l2;

    Mlp() = default;
    Mlp(std::string n, int in, int hidden, int out, uint64_t seed)
        : name(std::move(n)),
          l1(name + ".l1", in, hidden, seed),
          l2(name + ".l2", hidden, out, seed) {}

    ag::Var forward(const ag::Var& x) const {
        return l2.forward(ag::relu(l1.forward(x)));
    }

    void params(std::vector<Param>& out) const {
        l1.params(out);
        l2.params(out);
    }
};

struct Adam {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<Tensor> m, v;

    void reset(const std::vector<Param>& params) {
        t = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(Tensor::zeros(p.var.val().shape()));
            v.push_back(Tensor::zeros(p.var.val().shape()));
        }
    }

    void step(std::vector<Param>& params) {
        if (m.size() != params.size()) reset(params);
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t k = 0; k < params.size(); ++k) {
            Tensor& w = params[k].var.val();
            const Tensor& g = params[k].var.grad();
            for (size_t i = 0; i < w.numel(); ++i) {
                m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g[i];
                v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g[i] * g[i];
                const double mhat = m[k][i] / bc1;
                const double vhat = v[k][i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

inline void zero_grads(std::vector<Param>& params) {
    for (auto& p : params) p.var.zero_grad();
}

// Scales gradients so the global norm does not exceed max_norm.
inline double clip_grad_norm(std::vector<Param>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        const Tensor& g = p.var.grad();
        for (size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params) {
            Tensor& g = p.var.grad();
            for (size_t i = 0; i < g.numel(); ++i) g[i] *= s;
        }
    }
    return norm;
}

}  // namespace afford3d::nn
