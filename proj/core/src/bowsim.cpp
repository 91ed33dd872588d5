#include "loopdet/bowsim.hpp"

#include <cmath>

namespace loopdet {

Eigen::MatrixXd cosine_confusion(const BowMatrix& bow) {
    const int m = bow.image_count();
    Eigen::MatrixXd counts = bow.counts.cast<double>();
    Eigen::VectorXd norms(m);
    for (int i = 0; i < m; ++i) norms(i) = counts.row(i).norm();

    Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        if (norms(i) == 0.0) continue;
        sim(i, i) = 1.0;
        for (int j = 0; j < i; ++j) {
            if (norms(j) == 0.0) continue;
            // Clamp away the ulp of rounding so entries stay in [0,1] exactly.
            const double s = std::min(
                counts.row(i).dot(counts.row(j)) / (norms(i) * norms(j)), 1.0);
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }
    return sim;
}

}  // namespace loopdet
