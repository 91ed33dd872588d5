#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "loopdet/dataio.hpp"
#include "loopdet/errors.hpp"

namespace loopdet {

/// Match-score matrix plus the temporal guard band that defines which entries
/// participate in scoring: (i,j) is masked out when |i-j| <= guard, so the
/// diagonal is always excluded.
struct ConfusionMatrix {
    Eigen::MatrixXd scores;  // M x M, probabilities or similarities in [0,1]
    int guard = 0;

    int size() const { return static_cast<int>(scores.rows()); }
    bool participates(int i, int j) const { return std::abs(i - j) > guard; }
};

struct MetricCounts {
    long tp = 0;
    long predicted_positives = 0;
    long gt_positives = 0;
};

/// Counts over the masked entries with the strict > threshold rule.
MetricCounts count_matches(const ConfusionMatrix& cm, const GroundTruthMatrix& gt,
                           double threshold);

/// TP / gt positives. Throws UndefinedMetric when there are no positives.
double recall(const ConfusionMatrix& cm, const GroundTruthMatrix& gt, double threshold);

/// TP / predicted positives (precision semantics). Throws UndefinedMetric
/// when nothing exceeds the threshold.
double accuracy(const ConfusionMatrix& cm, const GroundTruthMatrix& gt, double threshold);

struct SweepRow {
    double threshold = 0.0;
    double recall = std::numeric_limits<double>::quiet_NaN();    // NaN when undefined
    double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
    MetricCounts counts;
};

/// One row per threshold. A metric whose denominator is empty is reported as
/// NaN and flagged on stderr rather than dropping the row.
std::vector<SweepRow> sweep(const ConfusionMatrix& cm, const GroundTruthMatrix& gt,
                            const std::vector<double>& thresholds);

/// Confusion matrix CSV: M rows of comma-separated values, 9 significant digits.
void save_confusion_csv(const Eigen::MatrixXd& scores, const std::filesystem::path& path);
Eigen::MatrixXd load_confusion_csv(const std::filesystem::path& path);

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace loopdet
