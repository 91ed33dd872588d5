#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "loopdet/errors.hpp"

namespace loopdet {

/// Descriptors of one image: an n_i x D real matrix, one descriptor per row.
struct ImageDescriptors {
    std::string id;
    Eigen::MatrixXd descriptors;
};

/// Ordered per-image groups of fixed-dimension feature vectors. All images
/// share the same dimension; every value is finite. Immutable once built.
class DescriptorSet {
public:
    DescriptorSet() = default;

    /// Validates dimensions and finiteness; throws DimensionError / DataError.
    DescriptorSet(int dim, std::vector<ImageDescriptors> images);

    int dim() const { return dim_; }
    std::size_t image_count() const { return images_.size(); }
    const std::vector<ImageDescriptors>& images() const { return images_; }
    const ImageDescriptors& image(std::size_t i) const { return images_[i]; }

    /// Total descriptor count N = sum of n_i.
    std::size_t total_descriptors() const;

    /// All descriptors stacked into one N x D matrix, images in order.
    Eigen::MatrixXd stacked() const;

    bool operator==(const DescriptorSet& other) const;

private:
    int dim_ = 0;
    std::vector<ImageDescriptors> images_;
};

/// Principal component model fitted on descriptor rows.
/// basis columns are orthonormal; explained_variance is non-increasing.
struct PcaModel {
    Eigen::VectorXd mean;                // D
    Eigen::MatrixXd basis;               // D x k
    Eigen::VectorXd explained_variance;  // k

    int input_dim() const { return static_cast<int>(basis.rows()); }
    int output_dim() const { return static_cast<int>(basis.cols()); }
};

/// M x M matrix over {0,1}, loaded as-is (symmetry not required).
struct GroundTruthMatrix {
    Eigen::MatrixXi entries;

    int size() const { return static_cast<int>(entries.rows()); }
};

/// Reads a DSC1 file. Bad magic/version or truncation -> FormatError,
/// non-finite values -> DataError, unreadable path -> IoError.
DescriptorSet load_descriptors(const std::filesystem::path& path);

/// Writes a DSC1 file readable by load_descriptors. Values are stored as
/// float32, so the round trip is bit-exact for float-representable values
/// (everything that ever came out of load_descriptors).
void save_descriptors(const DescriptorSet& ds, const std::filesystem::path& path);

/// Fits PCA on the stacked descriptor rows: mean = column mean, basis = top-k
/// eigenvectors of the sample covariance with eigenvalues descending. Column
/// signs are fixed so each column's largest-magnitude entry is positive.
PcaModel fit_pca(const DescriptorSet& ds, int k);

/// Projects every descriptor: x -> basis^T (x - mean). Image grouping is
/// preserved; output dimension is the model's k.
DescriptorSet apply_pca(const PcaModel& model, const DescriptorSet& ds);

/// Loads a square CSV of 0/1 values. Ragged rows or non-square -> FormatError,
/// values outside {0,1} -> DataError.
GroundTruthMatrix load_ground_truth(const std::filesystem::path& path);

PcaModel load_pca(const std::filesystem::path& path);
void save_pca(const PcaModel& model, const std::filesystem::path& path);

}  // namespace loopdet
