#include "afford3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace afford3d::metrics {

std::optional<double> auc(const std::vector<double>& pred, const std::vector<double>& gt) {
    const size_t n = pred.size();
    if (n != gt.size() || n == 0) throw std::runtime_error("auc: size mismatch");

    size_t n_pos = 0;
    for (const double g : gt)
        if (g > 0.5) ++n_pos;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    // rank statistic with average ranks on ties; equals the fraction of
    // correctly ordered positive/negative pairs with ties counted one half
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return pred[a] < pred[b]; });

    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && pred[order[j]] == pred[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (size_t t = i; t < j; ++t)
            if (gt[order[t]] > 0.5) pos_rank_sum += avg_rank;
        i = j;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

void iou_counts(const std::vector<double>& pred, const std::vector<double>& gt, double thr,
                double& tp, double& fp, double& fn) {
    tp = fp = fn = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= thr;
        const bool g = gt[i] > 0.5;
        if (p && g)
            tp += 1.0;
        else if (p && !g)
            fp += 1.0;
        else if (!p && g)
            fn += 1.0;
    }
}

}  // namespace

std::optional<double> aiou(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.empty()) throw std::runtime_error("aiou: size mismatch");
    bool any_fg = false;
    for (const double g : gt)
        if (g > 0.5) any_fg = true;
    if (!any_fg) return std::nullopt;

    double total = 0.0;
    for (int t = 1; t <= 99; ++t) {
        double tp, fp, fn;
        iou_counts(pred, gt, t / 100.0, tp, fp, fn);
        total += tp / (tp + fp + fn);
    }
    return 100.0 * total / 99.0;
}

double sim(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.empty()) throw std::runtime_error("sim: size mismatch");
    double sp = 0.0, sg = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0.0 || gt[i] < 0.0) throw std::runtime_error("sim: negative input");
        sp += pred[i];
        sg += gt[i];
    }
    if (sp <= 0.0 || sg <= 0.0) throw std::runtime_error("sim: all-zero map");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) acc += std::min(pred[i] / sp, gt[i] / sg);
    return acc;
}

double mae(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.empty()) throw std::runtime_error("mae: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - gt[i]);
    return acc / static_cast<double>(pred.size());
}

double acc(const std::vector<int>& pred_labels, const std::vector<int>& gt_labels) {
    if (pred_labels.size() != gt_labels.size() || pred_labels.empty())
        throw std::runtime_error("acc: size mismatch");
    size_t hits = 0;
    for (size_t i = 0; i < pred_labels.size(); ++i)
        if (pred_labels[i] == gt_labels[i]) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred_labels.size());
}

void MetricAccumulator::add(const std::vector<double>& pred, const std::vector<double>& gt,
                            int pred_label, int gt_label) {
    ++n_;
    if (const auto v = auc(pred, gt))
        auc_vals_.push_back(*v);
    else
        ++skipped_auc_;
    if (const auto v = aiou(pred, gt))
        aiou_vals_.push_back(*v);
    else
        ++skipped_aiou_;
    double sp = 0.0, sg = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        sp += pred[i];
        sg += gt[i];
    }
    if (sp > 0.0 && sg > 0.0)
        sim_vals_.push_back(sim(pred, gt));
    else
        ++skipped_sim_;
    mae_vals_.push_back(mae(pred, gt));
    pred_labels_.push_back(pred_label);
    gt_labels_.push_back(gt_label);

    for (int t = 1; t <= 99; ++t) {
        double tp, fp, fn;
        iou_counts(pred, gt, t / 100.0, tp, fp, fn);
        pooled_tp_[t - 1] += tp;
        pooled_fp_[t - 1] += fp;
        pooled_fn_[t - 1] += fn;
    }
}

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

MetricReport MetricAccumulator::report() const {
    MetricReport r;
    r.n_samples = n_;
    r.auc = mean_of(auc_vals_);
    r.aiou = mean_of(aiou_vals_);
    r.sim = mean_of(sim_vals_);
    r.mae = mean_of(mae_vals_);
    r.acc = pred_labels_.empty() ? 0.0 : acc(pred_labels_, gt_labels_);
    r.skipped_auc = skipped_auc_;
    r.skipped_aiou = skipped_aiou_;
    r.skipped_sim = skipped_sim_;
    double pooled = 0.0;
    int valid = 0;
    for (int t = 0; t < 99; ++t) {
        const double denom = pooled_tp_[t] + pooled_fp_[t] + pooled_fn_[t];
        if (denom > 0.0) {
            pooled += pooled_tp_[t] / denom;
            ++valid;
        }
    }
    r.aiou_threshold_avg = valid > 0 ? 100.0 * pooled / valid : 0.0;
    return r;
}

std::string MetricReport::to_text() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "auc=%.6f\naiou_sample_avg=%.6f\naiou_threshold_avg=%.6f\nsim=%.6f\n"
                  "mae=%.6f\nacc=%.6f\nn_samples=%d\nskipped_auc=%d\nskipped_aiou=%d\n"
                  "skipped_sim=%d\n",
                  auc, aiou, aiou_threshold_avg, sim, mae, acc, n_samples, skipped_auc,
                  skipped_aiou, skipped_sim);
    return buf;
}

void write_report(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << report.to_text();
}

}  // namespace afford3d::metrics
