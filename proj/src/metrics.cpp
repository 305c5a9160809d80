#include "firecast/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace firecast {

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw DataError("roc_auc: scores and labels must be nonempty and equal-length");
    long long pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg)++;
    if (pos == 0 || neg == 0) throw DataError("roc_auc: needs both classes present");

    RocResult result;
    for (int k = 20; k >= 0; --k) {
        const double thr = k * 0.05;
        long long tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] > thr) (labels[i] ? tp : fp)++;
        }
        result.points.push_back({thr, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }

    std::vector<std::pair<double, double>> pts; // (fpr, tpr)
    pts.emplace_back(0.0, 0.0);
    for (const auto& p : result.points) pts.emplace_back(p.fpr, p.tpr);
    pts.emplace_back(1.0, 1.0);
    std::sort(pts.begin(), pts.end());

    double auc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        auc += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    result.auc = auc;
    return result;
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold) {
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (pred && labels[i]) ++c.tp;
        else if (pred && !labels[i]) ++c.fp;
        else if (!pred && labels[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_score(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold) {
    const Confusion c = confusion_at(scores, labels, threshold);
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    return denom == 0.0 ? 0.0 : 2.0 * c.tp / denom;
}

double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    if (pairs == 0) throw DataError("mann_whitney_auc: needs both classes present");
    return wins / static_cast<double>(pairs);
}

} // namespace firecast
