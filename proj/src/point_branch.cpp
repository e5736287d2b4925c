#include "afford3d/point_branch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afford3d {

std::vector<int> farthest_point_sample(const PointCloud& cloud, int m, int start) {
    const int n = cloud.n();
    if (m > n) throw std::runtime_error("farthest_point_sample: m exceeds point count");
    if (start < 0 || start >= n) throw std::runtime_error("farthest_point_sample: bad start");

    std::vector<int> picks;
    picks.reserve(m);
    std::vector<double> dist(n, 1e300);
    int current = start;
    for (int it = 0; it < m; ++it) {
        picks.push_back(current);
        const double cx = cloud.coords(current, 0);
        const double cy = cloud.coords(current, 1);
        const double cz = cloud.coords(current, 2);
        int next = -1;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double dx = cloud.coords(i, 0) - cx;
            const double dy = cloud.coords(i, 1) - cy;
            const double dz = cloud.coords(i, 2) - cz;
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < dist[i]) dist[i] = d2;
            if (dist[i] > best) {
                best = dist[i];
                next = i;
            }
        }
        current = next;
    }
    return picks;
}

std::vector<std::vector<int>> knn_indices(const Tensor& coords, int k) {
    const int n = coords.rows();
    if (k > n) throw std::runtime_error("knn_indices: k exceeds point count");
    std::vector<std::vector<int>> nbr(n);
    std::vector<std::pair<double, int>> cand(n);
    for (int i = 0; i < n; ++i) {
        const double xi = coords(i, 0), yi = coords(i, 1), zi = coords(i, 2);
        for (int j = 0; j < n; ++j) {
            const double dx = coords(j, 0) - xi;
            const double dy = coords(j, 1) - yi;
            const double dz = coords(j, 2) - zi;
            cand[j] = {dx * dx + dy * dy + dz * dz, j};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        nbr[i].resize(k);
        for (int j = 0; j < k; ++j) nbr[i][j] = cand[j].second;
    }
    return nbr;
}

PointBranch::PointBranch(int channels, int knn_k, int large_regions, int small_regions,
                         uint64_t seed)
    : channels_(channels),
      k_(knn_k),
      large_(large_regions),
      small_(small_regions),
      l1a_("point_encoder.l1a", 3, 16, seed),
      l1b_("point_encoder.l1b", 16, 32, seed),
      l2_("point_encoder.l2", 35, 64, seed),
      lift_("point_encoder.lift", 64, channels, seed) {}

ag::Var PointBranch::point_features(const PointCloud& cloud) const {
    const int n = cloud.n();
    const auto nbr = knn_indices(cloud.coords, k_);

    // relative coordinates of every neighbour, point-major: column i*k + j
    Tensor rel(3, n * k_);
    std::vector<int> flat(static_cast<size_t>(n) * k_);
    std::vector<int> seg(static_cast<size_t>(n) * k_);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k_; ++j) {
            const int t = i * k_ + j;
            const int p = nbr[i][j];
            flat[t] = p;
            seg[t] = i;
            for (int d = 0; d < 3; ++d) rel(d, t) = cloud.coords(p, d) - cloud.coords(i, d);
        }

    const ag::Var rel_v(rel);
    ag::Var h1 = ag::relu(l1b_.forward(ag::relu(l1a_.forward(rel_v))));
    ag::Var f1 = ag::segmented_max(h1, seg, n);  // 32 x N

    ag::Var gathered = ag::gather_cols(f1, flat);              // 32 x N*k
    ag::Var h2 = ag::relu(l2_.forward(ag::concat_rows({gathered, rel_v})));
    ag::Var f2 = ag::segmented_max(h2, seg, n);  // 64 x N

    // signed lift: keeps region cosines spread around zero so the
    // relu-thresholded similarity graph stays selective
    return lift_.forward(f2);  // C x N
}

RegionSet PointBranch::group(const PointCloud& cloud, const ag::Var& point_feats,
                             RegionScale scale) const {
    const int n = cloud.n();
    const int m = regions_at(scale);

    RegionSet rs;
    rs.scale = scale;
    rs.center_index = farthest_point_sample(cloud, m, 0);
    rs.centers = Tensor(m, 3);
    for (int r = 0; r < m; ++r)
        for (int d = 0; d < 3; ++d) rs.centers(r, d) = cloud.coords(rs.center_index[r], d);

    rs.assignment.resize(n);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        double bestd = 1e300;
        for (int r = 0; r < m; ++r) {
            const double dx = cloud.coords(i, 0) - rs.centers(r, 0);
            const double dy = cloud.coords(i, 1) - rs.centers(r, 1);
            const double dz = cloud.coords(i, 2) - rs.centers(r, 2);
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < bestd) {
                bestd = d2;
                best = r;
            }
        }
        rs.assignment[i] = best;
    }
    // a center always owns its source point, so no region is empty
    for (int r = 0; r < m; ++r) rs.assignment[rs.center_index[r]] = r;

    rs.features = center_regions(ag::segmented_max(point_feats, rs.assignment, m));
    return rs;
}

SimilarityGraph build_graph_from_features(const Tensor& features) {
    const int c = features.rows(), m = features.cols();
    Tensor unit(c, m);
    for (int j = 0; j < m; ++j) {
        double nrm = 0.0;
        for (int i = 0; i < c; ++i) nrm += features(i, j) * features(i, j);
        nrm = std::sqrt(nrm);
        if (nrm > 1e-15)
            for (int i = 0; i < c; ++i) unit(i, j) = features(i, j) / nrm;
        // zero-norm column stays zero: isolated node with a self-loop only
    }

    SimilarityGraph g;
    g.raw = matmul_tn(unit, unit);
    g.adjacency = Tensor(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            g.adjacency(i, j) = std::max(0.0, g.raw(i, j)) + (i == j ? 1.0 : 0.0);

    std::vector<double> isqrt(m);
    for (int i = 0; i < m; ++i) {
        double deg = 0.0;
        for (int j = 0; j < m; ++j) deg += g.adjacency(i, j);
        isqrt[i] = 1.0 / std::sqrt(deg);
    }
    g.normalized = Tensor(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            g.normalized(i, j) = g.adjacency(i, j) * (isqrt[i] * isqrt[j]);
    return g;
}

SimilarityGraph build_graph(const RegionSet& regions) {
    return build_graph_from_features(regions.features.val());
}

void PointBranch::params(std::vector<nn::Param>& out) const {
    l1a_.params(out);
    l1b_.params(out);
    l2_.params(out);
    lift_.params(out);
}

}  // namespace afford3d
