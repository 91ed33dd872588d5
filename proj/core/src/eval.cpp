#include "loopdet/eval.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace loopdet {

namespace {

void check_shapes(const ConfusionMatrix& cm, const GroundTruthMatrix& gt) {
    if (cm.scores.rows() != cm.scores.cols()) {
        throw DimensionError("confusion matrix is not square");
    }
    if (cm.size() != gt.size()) {
        throw DimensionError("confusion matrix size " + std::to_string(cm.size()) +
                             " does not match ground truth size " + std::to_string(gt.size()));
    }
    if (!cm.scores.allFinite()) throw DataError("non-finite confusion matrix entry");
}

}  // namespace

MetricCounts count_matches(const ConfusionMatrix& cm, const GroundTruthMatrix& gt,
                           double threshold) {
    check_shapes(cm, gt);
    MetricCounts counts;
    const int m = cm.size();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (!cm.participates(i, j)) continue;
            const bool predicted = cm.scores(i, j) > threshold;
            const bool positive = gt.entries(i, j) == 1;
            if (predicted && positive) ++counts.tp;
            if (predicted) ++counts.predicted_positives;
            if (positive) ++counts.gt_positives;
        }
    }
    return counts;
}

double recall(const ConfusionMatrix& cm, const GroundTruthMatrix& gt, double threshold) {
    const auto counts = count_matches(cm, gt, threshold);
    if (counts.gt_positives == 0) {
        throw UndefinedMetric("recall undefined: no ground-truth positives in the mask");
    }
    return static_cast<double>(counts.tp) / static_cast<double>(counts.gt_positives);
}

double accuracy(const ConfusionMatrix& cm, const GroundTruthMatrix& gt, double threshold) {
    const auto counts = count_matches(cm, gt, threshold);
    if (counts.predicted_positives == 0) {
        throw UndefinedMetric("accuracy undefined: no scores above threshold in the mask");
    }
    return static_cast<double>(counts.tp) / static_cast<double>(counts.predicted_positives);
}

std::vector<SweepRow> sweep(const ConfusionMatrix& cm, const GroundTruthMatrix& gt,
                            const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw ArgumentError("threshold list is empty");
    std::vector<SweepRow> rows;
    rows.reserve(thresholds.size());
    for (const double t : thresholds) {
        SweepRow row;
        row.threshold = t;
        row.counts = count_matches(cm, gt, t);
        if (row.counts.gt_positives > 0) {
            row.recall = static_cast<double>(row.counts.tp) /
                         static_cast<double>(row.counts.gt_positives);
        } else {
            std::cerr << "sweep: recall undefined at threshold " << t << "\n";
        }
        if (row.counts.predicted_positives > 0) {
            row.accuracy = static_cast<double>(row.counts.tp) /
                           static_cast<double>(row.counts.predicted_positives);
        } else {
            std::cerr << "sweep: accuracy undefined at threshold " << t
                      << " (no predictions)\n";
        }
        rows.push_back(row);
    }
    return rows;
}

void save_confusion_csv(const Eigen::MatrixXd& scores, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    char buf[64];
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", scores(i, j));
            out << buf;
            if (j + 1 < scores.cols()) out << ',';
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd load_confusion_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
            } catch (const std::exception&) {
                throw FormatError("unparseable confusion matrix cell '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    const std::size_t m = rows.size();
    for (const auto& row : rows) {
        if (row.size() != m) throw FormatError("confusion matrix CSV is not square");
    }
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return scores;
}

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "threshold,recall,accuracy,tp,predicted_positives,gt_positives\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g", row.threshold);
        out << buf << ',';
        if (std::isnan(row.recall)) {
            out << "nan";
        } else {
            std::snprintf(buf, sizeof(buf), "%.9g", row.recall);
            out << buf;
        }
        out << ',';
        if (std::isnan(row.accuracy)) {
            out << "nan";
        } else {
            std::snprintf(buf, sizeof(buf), "%.9g", row.accuracy);
            out << buf;
        }
        out << ',' << row.counts.tp << ',' << row.counts.predicted_positives << ','
            << row.counts.gt_positives << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace loopdet
