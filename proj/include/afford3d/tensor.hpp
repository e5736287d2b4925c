#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "afford3d/rng.hpp"

namespace afford3d {

// Dense row-major double tensor. Rank 1..3 is all the pipeline needs:
// feature maps are (channels x tokens), images are (channels x h x w).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        v_.assign(numel_of(shape_), 0.0);
    }

    Tensor(int rows, int cols) : Tensor(std::vector<int>{rows, cols}) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double value) {
        Tensor t(std::move(shape));
        for (auto& x : t.v_) x = value;
        return t;
    }

    static Tensor scalar(double value) {
        Tensor t(1, 1);
        t.v_[0] = value;
        return t;
    }

    static Tensor from(int rows, int cols, std::initializer_list<double> values) {
        Tensor t(rows, cols);
        assert(values.size() == t.v_.size());
        size_t i = 0;
        for (const double x : values) t.v_[i++] = x;
        return t;
    }

    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (auto& x : t.v_) x = rng.normal(0.0, stddev);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int size(int dim) const { return shape_[static_cast<size_t>(dim)]; }
    size_t numel() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    // 2-D view helpers; rank-3 tensors flatten their trailing dims
    int rows() const { return shape_.empty() ? 0 : shape_[0]; }
    int cols() const {
        if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
        int c = 1;
        for (size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
        return c;
    }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols() + j]; }
    double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols() + j]; }

    double& at3(int c, int i, int j) {
        return v_[(static_cast<size_t>(c) * shape_[1] + i) * shape_[2] + j];
    }
    double at3(int c, int i, int j) const {
        return v_[(static_cast<size_t>(c) * shape_[1] + i) * shape_[2] + j];
    }

    double item() const {
        assert(numel() == 1);
        return v_[0];
    }

    Tensor reshaped(std::vector<int> shape) const {
        assert(numel_of(shape) == v_.size());
        Tensor t;
        t.shape_ = std::move(shape);
        t.v_ = v_;
        return t;
    }

    void fill(double value) {
        for (auto& x : v_) x = value;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (const double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    static size_t numel_of(const std::vector<int>& shape) {
        size_t n = shape.empty() ? 0 : 1;
        for (const int d : shape) n *= static_cast<size_t>(d);
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> v_;
};

// Column tile sized so an output row tile stays in L1 across the k loop.
inline constexpr int kGemmTile = 512;

// out = A(m x k) * B(k x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    assert(b.rows() == k);
    Tensor out(m, n);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int j0 = 0; j0 < n; j0 += kGemmTile) {
        const int j1 = std::min(n, j0 + kGemmTile);
        for (int i = 0; i < m; ++i) {
            double* orow = po + static_cast<size_t>(i) * n;
            const double* arow = pa + static_cast<size_t>(i) * k;
            for (int l = 0; l < k; ++l) {
                const double av = arow[l];
                if (av == 0.0) continue;
                const double* brow = pb + static_cast<size_t>(l) * n;
                for (int j = j0; j < j1; ++j) orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

// out = A^T(m x k) * B(k x n), with A stored (k x m)
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    const int k = a.rows(), m = a.cols(), n = b.cols();
    assert(b.rows() == k);
    Tensor out(m, n);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int j0 = 0; j0 < n; j0 += kGemmTile) {
        const int j1 = std::min(n, j0 + kGemmTile);
        for (int i = 0; i < m; ++i) {
            double* orow = po + static_cast<size_t>(i) * n;
            for (int l = 0; l < k; ++l) {
                const double av = pa[static_cast<size_t>(l) * m + i];
                if (av == 0.0) continue;
                const double* brow = pb + static_cast<size_t>(l) * n;
                for (int j = j0; j < j1; ++j) orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

// out = A(m x k) * B^T(k x n), with B stored (n x k)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const int m = a.rows(), k = a.cols(), n = b.rows();
    assert(b.cols() == k);
    Tensor out(m, n);
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * k;
        double* orow = out.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b.data() + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            orow[j] = acc;
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out(n, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(j, i) = a(i, j);
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    assert(a.numel() == b.numel());
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) return false;
    for (size_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace afford3d
