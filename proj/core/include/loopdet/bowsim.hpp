#pragma once

#include <Eigen/Core>

#include "loopdet/codebook.hpp"

namespace loopdet {

/// Image-vs-image cosine similarity over BoW count histograms. Zero-count
/// rows score 0 against everything (including themselves); the matrix is
/// symmetric with unit diagonal for nonzero rows.
Eigen::MatrixXd cosine_confusion(const BowMatrix& bow);

}  // namespace loopdet
