#include "afford3d/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afford3d::ag {

namespace {

thread_local bool g_grad_enabled = true;

Tensor& gref(Node* n) {
    if (n->grad.numel() == 0) n->grad = Tensor::zeros(n->val.shape());
    return n->grad;
}

bool wants(const Node* n) { return n->requires_grad; }

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back) {
    bool rg = false;
    if (g_grad_enabled)
        for (const auto& p : parents)
            if (p.requires_grad()) rg = true;
    Var out(std::move(value), rg);
    if (rg) {
        auto n = out.node();
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->back = std::move(back);
    }
    return out;
}

void backward(const Var& root) {
    if (!root.requires_grad()) return;
    if (root.val().numel() != 1)
        throw std::runtime_error("backward: root must be scalar, got " +
                                 root.val().shape_str());

    static int epoch = 0;
    const int mark = ++epoch;

    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    root.node()->mark = mark;
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->mark != mark && p->requires_grad) {
                p->mark = mark;
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    gref(root.node().get()).fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back) {
            gref(n);
            n->back(*n);
        }
    }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    assert(a.val().same_shape(b.val()));
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] += b.val()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (wants(pb)) {
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    assert(a.val().same_shape(b.val()));
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] -= b.val()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (wants(pb)) {
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    assert(a.val().same_shape(b.val()));
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= b.val()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pb->val[i];
        }
        if (wants(pb)) {
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pa->val[i];
        }
    });
}

Var div(const Var& a, const Var& b) {
    assert(a.val().same_shape(b.val()));
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] /= b.val()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] / pb->val[i];
        }
        if (wants(pb)) {
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) {
                const double bv = pb->val[i];
                g[i] -= self.grad[i] * pa->val[i] / (bv * bv);
            }
        }
    });
}

Var add_col(const Var& a, const Var& col) {
    const int rows = a.rows(), cols = a.cols();
    assert(col.rows() == rows && col.cols() == 1);
    Tensor out = a.val();
    for (int i = 0; i < rows; ++i) {
        const double c = col.val()[i];
        for (int j = 0; j < cols; ++j) out(i, j) += c;
    }
    Node* pa = a.node().get();
    Node* pc = col.node().get();
    return make_op(std::move(out), {a, col}, [pa, pc, rows, cols](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (wants(pc)) {
            Tensor& g = gref(pc);
            for (int i = 0; i < rows; ++i) {
                double acc = 0.0;
                for (int j = 0; j < cols; ++j) acc += self.grad(i, j);
                g[i] += acc;
            }
        }
    });
}

Var mul_col(const Var& a, const Var& col) {
    const int rows = a.rows(), cols = a.cols();
    assert(col.rows() == rows && col.cols() == 1);
    Tensor out = a.val();
    for (int i = 0; i < rows; ++i) {
        const double c = col.val()[i];
        for (int j = 0; j < cols; ++j) out(i, j) *= c;
    }
    Node* pa = a.node().get();
    Node* pc = col.node().get();
    return make_op(std::move(out), {a, col}, [pa, pc, rows, cols](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (int i = 0; i < rows; ++i) {
                const double c = pc->val[i];
                for (int j = 0; j < cols; ++j) g(i, j) += self.grad(i, j) * c;
            }
        }
        if (wants(pc)) {
            Tensor& g = gref(pc);
            for (int i = 0; i < rows; ++i) {
                double acc = 0.0;
                for (int j = 0; j < cols; ++j) acc += self.grad(i, j) * pa->val(i, j);
                g[i] += acc;
            }
        }
    });
}

Var mul_row(const Var& a, const Var& row) {
    const int rows = a.rows(), cols = a.cols();
    assert(static_cast<int>(row.val().numel()) == cols);
    Tensor out = a.val();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) *= row.val()[j];
    Node* pa = a.node().get();
    Node* pr = row.node().get();
    return make_op(std::move(out), {a, row}, [pa, pr, rows, cols](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) g(i, j) += self.grad(i, j) * pr->val[j];
        }
        if (wants(pr)) {
            Tensor& g = gref(pr);
            for (int j = 0; j < cols; ++j) {
                double acc = 0.0;
                for (int i = 0; i < rows; ++i) acc += self.grad(i, j) * pa->val(i, j);
                g[j] += acc;
            }
        }
    });
}

Var mul_scalarv(const Var& a, const Var& s) {
    assert(s.val().numel() == 1);
    const double sv = s.val().item();
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    Node* pa = a.node().get();
    Node* ps = s.node().get();
    return make_op(std::move(out), {a, s}, [pa, ps, sv](Node& self) {
        if (wants(pa)) {
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * sv;
        }
        if (wants(ps)) {
            double acc = 0.0;
            for (size_t i = 0; i < self.grad.numel(); ++i)
                acc += self.grad[i] * pa->val[i];
            gref(ps)[0] += acc;
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, c](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * c;
    });
}

Var add_const(const Var& a, double c) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] += c;
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) {
            const double y = self.val[i];
            g[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Var relu(const Var& a) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i)
            if (pa->val[i] > 0.0) g[i] += self.grad[i];
    });
}

Var softplus(const Var& a) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) {
        const double x = out[i];
        out[i] = x > 30.0 ? x : std::log1p(std::exp(x));
    }
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i] / (1.0 + std::exp(-pa->val[i]));
    });
}

Var logv(const Var& a) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] / pa->val[i];
    });
}

Var pow_const(const Var& a, double p) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::pow(out[i], p);
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, p](Node& self) {
        if (!wants(pa) || p == 0.0) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i] * p * std::pow(pa->val[i], p - 1.0);
    });
}

Var clamp(const Var& a, double lo, double hi) {
    Tensor out = a.val();
    for (size_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, lo, hi](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) {
            const double x = pa->val[i];
            if (x >= lo && x <= hi) g[i] += self.grad[i];
        }
    });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
    Tensor out = afford3d::matmul(a.val(), b.val());
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor da = afford3d::matmul_nt(self.grad, pb->val);
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += da[i];
        }
        if (wants(pb)) {
            Tensor db = afford3d::matmul_tn(pa->val, self.grad);
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += db[i];
        }
    });
}

Var matmul_tn(const Var& a, const Var& b) {
    Tensor out = afford3d::matmul_tn(a.val(), b.val());
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor da = afford3d::matmul_nt(pb->val, self.grad);
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += da[i];
        }
        if (wants(pb)) {
            Tensor db = afford3d::matmul(pa->val, self.grad);
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += db[i];
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    Tensor out = afford3d::matmul_nt(a.val(), b.val());
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_op(std::move(out), {a, b}, [pa, pb](Node& self) {
        if (wants(pa)) {
            Tensor da = afford3d::matmul(self.grad, pb->val);
            Tensor& g = gref(pa);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += da[i];
        }
        if (wants(pb)) {
            Tensor db = afford3d::matmul_tn(self.grad, pa->val);
            Tensor& g = gref(pb);
            for (size_t i = 0; i < g.numel(); ++i) g[i] += db[i];
        }
    });
}

Var softmax_rows(const Var& a) {
    const int rows = a.rows(), cols = a.cols();
    Tensor out = a.val();
    for (int i = 0; i < rows; ++i) {
        double m = out(i, 0);
        for (int j = 1; j < cols; ++j) m = std::max(m, out(i, j));
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            out(i, j) = std::exp(out(i, j) - m);
            sum += out(i, j);
        }
        for (int j = 0; j < cols; ++j) out(i, j) /= sum;
    }
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, rows, cols](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (int i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += self.grad(i, j) * self.val(i, j);
            for (int j = 0; j < cols; ++j)
                g(i, j) += self.val(i, j) * (self.grad(i, j) - dot);
        }
    });
}

// ------------------------------------------------------- reductions / shaping

Var sum_all(const Var& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.val().numel(); ++i) s += a.val()[i];
    Node* pa = a.node().get();
    return make_op(Tensor::scalar(s), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        const double gv = self.grad[0];
        for (size_t i = 0; i < g.numel(); ++i) g[i] += gv;
    });
}

Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a.val().numel());
    double s = 0.0;
    for (size_t i = 0; i < a.val().numel(); ++i) s += a.val()[i];
    Node* pa = a.node().get();
    return make_op(Tensor::scalar(s * inv), {a}, [pa, inv](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        const double gv = self.grad[0] * inv;
        for (size_t i = 0; i < g.numel(); ++i) g[i] += gv;
    });
}

Var mean_cols(const Var& a) {
    const int rows = a.rows(), cols = a.cols();
    const double inv = 1.0 / cols;
    Tensor out(rows, 1);
    for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += a.val()(i, j);
        out[i] = s * inv;
    }
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, rows, cols, inv](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (int i = 0; i < rows; ++i) {
            const double gv = self.grad[i] * inv;
            for (int j = 0; j < cols; ++j) g(i, j) += gv;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    assert(!parts.empty());
    const int cols = parts[0].cols();
    int rows = 0;
    for (const auto& p : parts) {
        assert(p.cols() == cols);
        rows += p.rows();
    }
    Tensor out(rows, cols);
    int r = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p.rows(); ++i)
            for (int j = 0; j < cols; ++j) out(r + i, j) = p.val()(i, j);
        r += p.rows();
    }
    std::vector<Node*> nodes;
    std::vector<int> offsets;
    r = 0;
    for (const auto& p : parts) {
        nodes.push_back(p.node().get());
        offsets.push_back(r);
        r += p.rows();
    }
    return make_op(std::move(out), parts, [nodes, offsets, cols](Node& self) {
        for (size_t k = 0; k < nodes.size(); ++k) {
            if (!wants(nodes[k])) continue;
            Tensor& g = gref(nodes[k]);
            const int pr = g.rows();
            for (int i = 0; i < pr; ++i)
                for (int j = 0; j < cols; ++j)
                    g(i, j) += self.grad(offsets[k] + i, j);
        }
    });
}

Var slice_rows(const Var& a, int r0, int r1) {
    const int cols = a.cols();
    Tensor out(r1 - r0, cols);
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < cols; ++j) out(i - r0, j) = a.val()(i, j);
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, r0, r1, cols](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < cols; ++j) g(i, j) += self.grad(i - r0, j);
    });
}

Var reshape(const Var& a, std::vector<int> shape) {
    Tensor out = a.val().reshaped(shape);
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        for (size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

// ----------------------------------------------------------------- indexed

Var gather_cols(const Var& a, const std::vector<int>& idx) {
    const int rows = a.rows();
    const int n = static_cast<int>(idx.size());
    Tensor out(rows, n);
    for (int i = 0; i < rows; ++i) {
        const double* arow = a.val().data() + static_cast<size_t>(i) * a.cols();
        double* orow = out.data() + static_cast<size_t>(i) * n;
        for (int t = 0; t < n; ++t) orow[t] = arow[idx[t]];
    }
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, idx, rows, n](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        const int acols = g.cols();
        for (int i = 0; i < rows; ++i) {
            double* grow = g.data() + static_cast<size_t>(i) * acols;
            const double* srow = self.grad.data() + static_cast<size_t>(i) * n;
            for (int t = 0; t < n; ++t) grow[idx[t]] += srow[t];
        }
    });
}

Var segmented_max(const Var& a, const std::vector<int>& seg, int n_segments) {
    const int rows = a.rows(), cols = a.cols();
    assert(static_cast<int>(seg.size()) == cols);
    Tensor out(rows, n_segments);
    std::vector<int> argmax(static_cast<size_t>(rows) * n_segments, -1);
    for (int j = 0; j < cols; ++j) {
        const int m = seg[j];
        assert(m >= 0 && m < n_segments);
        for (int i = 0; i < rows; ++i) {
            const double v = a.val()(i, j);
            int& am = argmax[static_cast<size_t>(i) * n_segments + m];
            if (am < 0 || v > out(i, m)) {
                out(i, m) = v;
                am = j;
            }
        }
    }
    for (int m = 0; m < n_segments; ++m)
        if (argmax[static_cast<size_t>(m)] < 0 && rows > 0)
            throw std::runtime_error("segmented_max: empty segment " + std::to_string(m));
    Node* pa = a.node().get();
    return make_op(std::move(out), {a},
                   [pa, argmax = std::move(argmax), rows, n_segments](Node& self) {
                       if (!wants(pa)) return;
                       Tensor& g = gref(pa);
                       for (int i = 0; i < rows; ++i)
                           for (int m = 0; m < n_segments; ++m) {
                               const int j = argmax[static_cast<size_t>(i) * n_segments + m];
                               g(i, j) += self.grad(i, m);
                           }
                   });
}

Var weighted_cols(const Var& a, const std::vector<std::array<int, 3>>& idx,
                  const std::vector<std::array<double, 3>>& w) {
    const int rows = a.rows();
    const int n = static_cast<int>(idx.size());
    Tensor out(rows, n);
    for (int i = 0; i < rows; ++i) {
        const double* arow = a.val().data() + static_cast<size_t>(i) * a.cols();
        double* orow = out.data() + static_cast<size_t>(i) * n;
        for (int t = 0; t < n; ++t)
            orow[t] = w[t][0] * arow[idx[t][0]] + w[t][1] * arow[idx[t][1]] +
                      w[t][2] * arow[idx[t][2]];
    }
    Node* pa = a.node().get();
    return make_op(std::move(out), {a}, [pa, idx, w, rows, n](Node& self) {
        if (!wants(pa)) return;
        Tensor& g = gref(pa);
        const int acols = g.cols();
        for (int i = 0; i < rows; ++i) {
            double* grow = g.data() + static_cast<size_t>(i) * acols;
            const double* srow = self.grad.data() + static_cast<size_t>(i) * n;
            for (int t = 0; t < n; ++t)
                for (int k = 0; k < 3; ++k) grow[idx[t][k]] += w[t][k] * srow[t];
        }
    });
}

// -------------------------------------------------------------------- images

namespace {

Tensor im2col(const Tensor& x, int kh, int kw, int stride, int pad, int ho, int wo) {
    const int cin = x.size(0), h = x.size(1), w = x.size(2);
    Tensor col(cin * kh * kw, ho * wo);
    for (int c = 0; c < cin; ++c)
        for (int di = 0; di < kh; ++di)
            for (int dj = 0; dj < kw; ++dj) {
                const int row = (c * kh + di) * kw + dj;
                double* dst = col.data() + static_cast<size_t>(row) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + di;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + dj;
                        dst[oy * wo + ox] =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at3(c, iy, ix) : 0.0;
                    }
                }
            }
    return col;
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int kh, int kw,
           int stride, int pad) {
    const int cin = x.val().size(0), h = x.val().size(1), w = x.val().size(2);
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (w + 2 * pad - kw) / stride + 1;
    const int cout = weight.rows();
    assert(weight.cols() == cin * kh * kw);

    Tensor col = im2col(x.val(), kh, kw, stride, pad, ho, wo);
    Tensor out2d = afford3d::matmul(weight.val(), col);
    for (int c = 0; c < cout; ++c) {
        const double b = bias.val()[c];
        double* row = out2d.data() + static_cast<size_t>(c) * ho * wo;
        for (int i = 0; i < ho * wo; ++i) row[i] += b;
    }
    Tensor out = out2d.reshaped({cout, ho, wo});

    Node* px = x.node().get();
    Node* pw = weight.node().get();
    Node* pb = bias.node().get();
    return make_op(std::move(out), {x, weight, bias},
                   [px, pw, pb, col = std::move(col), kh, kw, stride, pad, cin, h, w, ho,
                    wo](Node& self) {
                       const Tensor g2d = self.grad.reshaped({self.grad.size(0), ho * wo});
                       if (wants(pw)) {
                           Tensor dw = afford3d::matmul_nt(g2d, col);
                           Tensor& g = gref(pw);
                           for (size_t i = 0; i < g.numel(); ++i) g[i] += dw[i];
                       }
                       if (wants(pb)) {
                           Tensor& g = gref(pb);
                           for (int c = 0; c < g2d.rows(); ++c) {
                               double acc = 0.0;
                               const double* row = g2d.data() + static_cast<size_t>(c) * ho * wo;
                               for (int i = 0; i < ho * wo; ++i) acc += row[i];
                               g[c] += acc;
                           }
                       }
                       if (wants(px)) {
                           Tensor dcol = afford3d::matmul_tn(pw->val, g2d);
                           Tensor& g = gref(px);
                           for (int c = 0; c < cin; ++c)
                               for (int di = 0; di < kh; ++di)
                                   for (int dj = 0; dj < kw; ++dj) {
                                       const int row = (c * kh + di) * kw + dj;
                                       const double* src =
                                           dcol.data() + static_cast<size_t>(row) * ho * wo;
                                       for (int oy = 0; oy < ho; ++oy) {
                                           const int iy = oy * stride - pad + di;
                                           if (iy < 0 || iy >= h) continue;
                                           for (int ox = 0; ox < wo; ++ox) {
                                               const int ix = ox * stride - pad + dj;
                                               if (ix < 0 || ix >= w) continue;
                                               g.at3(c, iy, ix) += src[oy * wo + ox];
                                           }
                                       }
                                   }
                       }
                   });
}

Var adaptive_avg_pool2d(const Var& x, int oh, int ow) {
    const int c = x.val().size(0), h = x.val().size(1), w = x.val().size(2);
    Tensor out({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i) {
            const int r0 = (i * h) / oh;
            const int r1 = ((i + 1) * h + oh - 1) / oh;
            for (int j = 0; j < ow; ++j) {
                const int c0 = (j * w) / ow;
                const int c1 = ((j + 1) * w + ow - 1) / ow;
                double acc = 0.0;
                for (int y = r0; y < r1; ++y)
                    for (int z = c0; z < c1; ++z) acc += x.val().at3(ch, y, z);
                out.at3(ch, i, j) = acc / ((r1 - r0) * (c1 - c0));
            }
        }
    Node* px = x.node().get();
    return make_op(std::move(out), {x}, [px, c, h, w, oh, ow](Node& self) {
        if (!wants(px)) return;
        Tensor& g = gref(px);
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < oh; ++i) {
                const int r0 = (i * h) / oh;
                const int r1 = ((i + 1) * h + oh - 1) / oh;
                for (int j = 0; j < ow; ++j) {
                    const int c0 = (j * w) / ow;
                    const int c1 = ((j + 1) * w + ow - 1) / ow;
                    const double gv = self.grad.at3(ch, i, j) / ((r1 - r0) * (c1 - c0));
                    for (int y = r0; y < r1; ++y)
                        for (int z = c0; z < c1; ++z) g.at3(ch, y, z) += gv;
                }
            }
    });
}

Var mul_spatial(const Var& x, const Tensor& wmap) {
    const int c = x.val().size(0), h = x.val().size(1), w = x.val().size(2);
    assert(wmap.rows() == h && wmap.cols() == w);
    Tensor out = x.val();
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at3(ch, i, j) *= wmap(i, j);
    Node* px = x.node().get();
    return make_op(std::move(out), {x}, [px, wmap, c, h, w](Node& self) {
        if (!wants(px)) return;
        Tensor& g = gref(px);
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    g.at3(ch, i, j) += self.grad.at3(ch, i, j) * wmap(i, j);
    });
}

Var roi_align(const Var& x, const std::array<double, 4>& box, int bins) {
    const int c = x.val().size(0), h = x.val().size(1), w = x.val().size(2);
    const double bw = (box[2] - box[0]) / bins;
    const double bh = (box[3] - box[1]) / bins;
    const int n_tok = bins * bins;

    // Sample coordinates clamp into the box's own cell range so features
    // outside the roi never bleed in; a box of exactly one cell therefore
    // reproduces that cell.
    const double ux_lo = std::max(0.0, std::floor(box[0]));
    const double ux_hi = std::min(static_cast<double>(w - 1), std::ceil(box[2]) - 1.0);
    const double vy_lo = std::max(0.0, std::floor(box[1]));
    const double vy_hi = std::min(static_cast<double>(h - 1), std::ceil(box[3]) - 1.0);

    // one bilinear sample per bin center, cell centers at half-integer coords
    struct Sample {
        int i0, j0, i1, j1;
        double w00, w01, w10, w11;
    };
    std::vector<Sample> samples(n_tok);
    for (int by = 0; by < bins; ++by)
        for (int bx = 0; bx < bins; ++bx) {
            const double sx = box[0] + (bx + 0.5) * bw;
            const double sy = box[1] + (by + 0.5) * bh;
            double u = sx - 0.5, v = sy - 0.5;
            u = std::min(std::max(u, ux_lo), std::max(ux_lo, ux_hi));
            v = std::min(std::max(v, vy_lo), std::max(vy_lo, vy_hi));
            const int j0 = std::min(static_cast<int>(std::floor(u)), w - 1);
            const int i0 = std::min(static_cast<int>(std::floor(v)), h - 1);
            const int j1 = std::min(j0 + 1, w - 1);
            const int i1 = std::min(i0 + 1, h - 1);
            const double du = u - j0, dv = v - i0;
            samples[by * bins + bx] = {i0,
                                       j0,
                                       i1,
                                       j1,
                                       (1 - dv) * (1 - du),
                                       (1 - dv) * du,
                                       dv * (1 - du),
                                       dv * du};
        }

    Tensor out(c, n_tok);
    for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < n_tok; ++t) {
            const Sample& s = samples[t];
            out(ch, t) = s.w00 * x.val().at3(ch, s.i0, s.j0) +
                         s.w01 * x.val().at3(ch, s.i0, s.j1) +
                         s.w10 * x.val().at3(ch, s.i1, s.j0) +
                         s.w11 * x.val().at3(ch, s.i1, s.j1);
        }

    Node* px = x.node().get();
    return make_op(std::move(out), {x},
                   [px, samples = std::move(samples), c, n_tok](Node& self) {
                       if (!wants(px)) return;
                       Tensor& g = gref(px);
                       for (int ch = 0; ch < c; ++ch)
                           for (int t = 0; t < n_tok; ++t) {
                               const auto& s = samples[t];
                               const double gv = self.grad(ch, t);
                               g.at3(ch, s.i0, s.j0) += gv * s.w00;
                               g.at3(ch, s.i0, s.j1) += gv * s.w01;
                               g.at3(ch, s.i1, s.j0) += gv * s.w10;
                               g.at3(ch, s.i1, s.j1) += gv * s.w11;
                           }
                   });
}

Var softmax_cross_entropy(const Var& logits, int label) {
    const int k = static_cast<int>(logits.val().numel());
    assert(label >= 0 && label < k);
    double m = logits.val()[0];
    for (int i = 1; i < k; ++i) m = std::max(m, logits.val()[i]);
    double sum = 0.0;
    std::vector<double> p(k);
    for (int i = 0; i < k; ++i) {
        p[i] = std::exp(logits.val()[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    const double loss = -(logits.val()[label] - m - std::log(sum));
    Node* pl = logits.node().get();
    return make_op(Tensor::scalar(loss), {logits},
                   [pl, p = std::move(p), label, k](Node& self) {
                       if (!wants(pl)) return;
                       Tensor& g = gref(pl);
                       const double gv = self.grad[0];
                       for (int i = 0; i < k; ++i)
                           g[i] += gv * (p[i] - (i == label ? 1.0 : 0.0));
                   });
}

}  // namespace afford3d::ag
