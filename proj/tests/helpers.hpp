#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "afford3d/autograd.hpp"
#include "afford3d/rng.hpp"
#include "afford3d/tensor.hpp"

namespace testutil {

using afford3d::Rng;
using afford3d::Tensor;
namespace ag = afford3d::ag;

// Central-difference check of d(forward)/d(leaf) against the tape gradient.
// Returns the worst relative error over up to max_entries sampled entries.
inline double grad_check(ag::Var leaf, const std::function<ag::Var()>& forward,
                         int max_entries, Rng& rng, double h = 1e-5) {
    leaf.zero_grad();
    ag::Var loss = forward();
    ag::backward(loss);
    const Tensor analytic = leaf.grad();

    const int n = static_cast<int>(leaf.val().numel());
    const int count = std::min(n, max_entries);
    std::vector<int> picks;
    if (count == n)
        for (int i = 0; i < n; ++i) picks.push_back(i);
    else
        for (int i = 0; i < count; ++i) picks.push_back(static_cast<int>(rng.uniform_int(n)));

    double worst = 0.0;
    for (const int i : picks) {
        const double saved = leaf.val()[i];
        double lp, lm;
        {
            ag::NoGradGuard guard;
            leaf.val()[i] = saved + h;
            lp = forward().val().item();
            leaf.val()[i] = saved - h;
            lm = forward().val().item();
            leaf.val()[i] = saved;
        }
        const double fd = (lp - lm) / (2.0 * h);
        const double g = analytic[i];
        const double denom = std::max({std::fabs(fd), std::fabs(g), 1e-3});
        worst = std::max(worst, std::fabs(fd - g) / denom);
    }
    return worst;
}

// Jacobi eigenvalues of a symmetric matrix; enough for small spectral checks.
inline std::vector<double> sym_eigenvalues(Tensor a) {
    const int n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-18) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    return ev;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, scale);
    return t;
}

}  // namespace testutil
