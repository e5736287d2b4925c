#pragma once

#include <optional>
#include <string>
#include <vector>

namespace afford3d::metrics {

// Ground truth is binarized at 0.5 (strictly greater = positive) for AUC and
// aIoU; predictions are thresholded at t with pred >= t.

// ROC area as a percentage; exact, ties count one half. Degenerate ground
// truth (no positives or no negatives) yields nullopt ("skipped").
std::optional<double> auc(const std::vector<double>& pred, const std::vector<double>& gt);

// IoU averaged over thresholds 0.01..0.99 (step 0.01), as a percentage.
std::optional<double> aiou(const std::vector<double>& pred, const std::vector<double>& gt);

// histogram intersection of the sum-normalized maps, in [0,1]
double sim(const std::vector<double>& pred, const std::vector<double>& gt);

double mae(const std::vector<double>& pred, const std::vector<double>& gt);

// percentage of exact label matches
double acc(const std::vector<int>& pred_labels, const std::vector<int>& gt_labels);

struct MetricReport {
    double auc = 0.0;   // percentage
    double aiou = 0.0;  // percentage, per-sample average
    double sim = 0.0;
    double mae = 0.0;
    double acc = 0.0;  // percentage
    double aiou_threshold_avg = 0.0;  // dataset-pooled IoU averaged over thresholds
    int n_samples = 0;
    int skipped_auc = 0;
    int skipped_aiou = 0;
    int skipped_sim = 0;

    std::string to_text() const;
};

// Accumulates per-sample metrics and the dataset-pooled aIoU counts.
class MetricAccumulator {
public:
    void add(const std::vector<double>& pred, const std::vector<double>& gt, int pred_label,
             int gt_label);
    MetricReport report() const;

private:
    std::vector<double> auc_vals_, aiou_vals_, sim_vals_, mae_vals_;
    std::vector<int> pred_labels_, gt_labels_;
    int skipped_auc_ = 0, skipped_aiou_ = 0, skipped_sim_ = 0;
    // pooled TP/FP/FN per threshold across all samples
    std::vector<double> pooled_tp_ = std::vector<double>(99, 0.0);
    std::vector<double> pooled_fp_ = std::vector<double>(99, 0.0);
    std::vector<double> pooled_fn_ = std::vector<double>(99, 0.0);
    int n_ = 0;
};

void write_report(const MetricReport& report, const std::string& path);

}  // namespace afford3d::metrics
