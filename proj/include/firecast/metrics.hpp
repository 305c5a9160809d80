#pragma once

#include <optional>
#include <vector>

#include "firecast/errors.hpp"

namespace firecast {

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocResult {
    std::vector<RocPoint> points; // one per threshold, descending threshold order
    double auc;
};

// 21 uniform thresholds 0.00, 0.05, ..., 1.00; positive prediction iff
// score > threshold. AUC by trapezoid over (FPR, TPR) with (0,0)/(1,1) anchors.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Confusion {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold);

// F1 at score > threshold; 0 when the denominator vanishes.
double f1_score(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

// Exact Mann-Whitney pairwise statistic, used as the AUC oracle.
double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct WindowReport {
    int start_step = 0;
    int n = 0;
    int n_pos = 0;
    std::optional<double> auc; // absent when the window has a single class
    double f1 = 0.0;
    Confusion confusion;
};

} // namespace firecast
